//! Training runs over seeds and initializers, and the comparison report.

use std::fmt::Write as _;

use hev_core::driver_cycle::DriveCycle;
use hev_core::qlearning::{greedy_episode, train, Episode, HevEnv, LearningRecord, TrainOutcome};
use hev_core::warmstart::Initializer;
use rayon::prelude::*;

use crate::config::ExperimentConfig;
use crate::error::{HarnessError, Result};

#[derive(Debug, Clone)]
pub struct TrainRun {
    pub initializer: Initializer,
    pub seed: u64,
    pub outcome: TrainOutcome,
}

fn q_err(e: hev_core::qlearning::QError) -> HarnessError {
    HarnessError::Validation(e.to_string())
}

/// Trains one table per (initializer, seed) pair in parallel. Runs share no
/// state, so the result is independent of thread scheduling; it comes back
/// in input order.
pub fn train_runs(cfg: &ExperimentConfig, env: &HevEnv, cycle: &DriveCycle, inits: &[Initializer]) -> Result<Vec<TrainRun>> {
    let jobs: Vec<(Initializer, u64)> = inits.iter().flat_map(|&i| cfg.seeds.iter().map(move |&s| (i, s))).collect();
    jobs.par_iter()
        .map(|&(initializer, seed)| {
            let (q0, first) = initializer.training_start(env, &cfg.heuristic);
            let outcome = train(q0, cycle, &cfg.hyper_for(seed), env, first).map_err(q_err)?;
            Ok(TrainRun { initializer, seed, outcome })
        })
        .collect()
}

/// First iteration whose greedy reward sum reaches 95% of the final one.
/// Rewards carry a +1 per step offset, so this is almost always iteration 1.
pub fn iterations_to_threshold_literal(records: &[LearningRecord]) -> usize {
    let Some(last) = records.last() else { return 0 };
    let target = 0.95 * last.greedy_reward_sum;
    records.iter().find(|r| r.greedy_reward_sum >= target).map_or(last.iteration, |r| r.iteration)
}

/// First iteration whose greedy reward sum has closed 95% of the gap
/// between iteration 1 and the final iteration. A run that never improves
/// on iteration 1 scores 1.
pub fn iterations_to_threshold(records: &[LearningRecord]) -> usize {
    let (Some(first), Some(last)) = (records.first(), records.last()) else { return 0 };
    let gain = last.greedy_reward_sum - first.greedy_reward_sum;
    if gain <= 0.0 {
        return first.iteration;
    }
    let target = first.greedy_reward_sum + 0.95 * gain;
    records.iter().find(|r| r.greedy_reward_sum >= target).map_or(last.iteration, |r| r.iteration)
}

/// Per-seed outcome of one training run.
#[derive(Debug, Clone, PartialEq)]
pub struct SeedSummary {
    pub initializer: Initializer,
    pub seed: u64,
    /// Greedy mpg of the table the initializer hands to training.
    pub initial_mpg: Option<f64>,
    /// Greedy mpg recorded at iteration 1.
    pub first_iteration_mpg: Option<f64>,
    pub final_mpg: Option<f64>,
    pub final_soc: f64,
    pub final_reward_sum: f64,
    pub iterations_to_threshold: usize,
    pub iterations_to_threshold_literal: usize,
    pub updates: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ComparisonReport {
    pub rows: Vec<SeedSummary>,
}

fn mean(xs: impl Iterator<Item = f64>) -> Option<f64> {
    let (sum, n) = xs.fold((0.0, 0usize), |(s, n), x| (s + x, n + 1));
    (n > 0).then(|| sum / n as f64)
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or_else(|| "NaN".to_string(), |x| format!("{x:?}"))
}

impl ComparisonReport {
    pub fn build(runs: &[TrainRun], cfg: &ExperimentConfig, env: &HevEnv, cycle: &DriveCycle) -> Result<Self> {
        let rows = runs
            .par_iter()
            .map(|run| {
                let table = run
                    .initializer
                    .initial_table(cycle, env, &cfg.hyper_for(run.seed), &cfg.heuristic)
                    .map_err(q_err)?;
                let initial = greedy_episode(&table, cycle, env).map_err(q_err)?;
                let last = greedy_episode(&run.outcome.q, cycle, env).map_err(q_err)?;
                let recs = &run.outcome.records;
                Ok(SeedSummary {
                    initializer: run.initializer,
                    seed: run.seed,
                    initial_mpg: initial.mpg,
                    first_iteration_mpg: recs.first().and_then(|r| r.greedy_mpg),
                    final_mpg: last.mpg,
                    final_soc: last.final_soc,
                    final_reward_sum: last.reward_sum,
                    iterations_to_threshold: iterations_to_threshold(recs),
                    iterations_to_threshold_literal: iterations_to_threshold_literal(recs),
                    updates: recs.iter().filter(|r| r.updated).count(),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { rows })
    }

    pub fn for_initializer(&self, init: Initializer) -> impl Iterator<Item = &SeedSummary> {
        self.rows.iter().filter(move |r| r.initializer == init)
    }

    pub fn mean_iterations_to_threshold(&self, init: Initializer) -> Option<f64> {
        mean(self.for_initializer(init).map(|r| r.iterations_to_threshold as f64))
    }

    /// Per-seed rows followed by one `mean` row per initializer.
    pub fn to_csv(&self, preamble: &str) -> String {
        let mut out = crate::persist::comment_block(preamble);
        out.push_str(
            "initializer,seed,initial_mpg,first_iteration_mpg,final_mpg,final_soc,final_reward_sum,\
iterations_to_threshold,iterations_to_threshold_literal,updates\n",
        );
        for r in &self.rows {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{:?},{:?},{},{},{}",
                r.initializer.name(),
                r.seed,
                fmt_opt(r.initial_mpg),
                fmt_opt(r.first_iteration_mpg),
                fmt_opt(r.final_mpg),
                r.final_soc,
                r.final_reward_sum,
                r.iterations_to_threshold,
                r.iterations_to_threshold_literal,
                r.updates
            );
        }
        for init in Initializer::ALL {
            let rows: Vec<&SeedSummary> = self.for_initializer(init).collect();
            if rows.is_empty() {
                continue;
            }
            let m = |f: &dyn Fn(&SeedSummary) -> Option<f64>| mean(rows.iter().filter_map(|r| f(r)));
            let _ = writeln!(
                out,
                "{},mean,{},{},{},{},{},{},{},{}",
                init.name(),
                fmt_opt(m(&|r| r.initial_mpg)),
                fmt_opt(m(&|r| r.first_iteration_mpg)),
                fmt_opt(m(&|r| r.final_mpg)),
                fmt_opt(m(&|r| Some(r.final_soc))),
                fmt_opt(m(&|r| Some(r.final_reward_sum))),
                fmt_opt(m(&|r| Some(r.iterations_to_threshold as f64))),
                fmt_opt(m(&|r| Some(r.iterations_to_threshold_literal as f64))),
                fmt_opt(m(&|r| Some(r.updates as f64)))
            );
        }
        out
    }
}

/// Greedy evaluation of every trained table plus ECMS on one cycle.
pub fn cross_cycle(runs: &[TrainRun], env: &HevEnv, cycle: &DriveCycle) -> Result<(Episode, Vec<(String, Episode)>)> {
    let mut rng = hev_core::qlearning::seeded_rng(0);
    let ecms = hev_core::qlearning::rollout(hev_core::qlearning::Policy::Ecms, cycle, env, &mut rng).map_err(q_err)?;
    let evals = runs
        .par_iter()
        .map(|r| {
            let ep = greedy_episode(&r.outcome.q, cycle, env).map_err(q_err)?;
            Ok((format!("{}_seed{}", r.initializer.name(), r.seed), ep))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok((ecms, evals))
}
