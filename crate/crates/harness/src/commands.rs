//! The five CLI commands. Each returns the text it prints on success.

use std::fmt::Write as _;
use std::path::Path;

use hev_core::driver_cycle::DriveCycle;
use hev_core::qlearning::{greedy_episode, rollout, seeded_rng, Policy};
use hev_core::units::mps_to_mph;
use hev_core::warmstart::{action_map_csv, optimal_action_map, Initializer};

use crate::cli::{Command, Common};
use crate::config::ExperimentConfig;
use crate::error::{HarnessError, Result};
use crate::experiment::{cross_cycle, train_runs, ComparisonReport, TrainRun};
use crate::persist::{
    comment_block, curve_csv, episode_csv, mean_curve_csv, preamble, read_cycle, read_qtable, summary_row, write_file,
    SUMMARY_HEADER,
};

pub fn dispatch(cmd: &Command) -> Result<String> {
    match cmd {
        Command::Train(c) => cmd_train(&c.resolve()?),
        Command::Eval { common, qtable } => cmd_eval(&common.resolve()?, qtable),
        Command::EcmsEval(c) => cmd_ecms_eval(&c.resolve()?),
        Command::Compare(c) => cmd_compare(&c.resolve()?),
        Command::CycleValidate(c) => cmd_cycle_validate(c),
    }
}

fn cycle_stem(path: &Path) -> String {
    path.file_stem().map_or_else(|| "cycle".to_string(), |s| s.to_string_lossy().into_owned())
}

fn load_train_cycle(cfg: &ExperimentConfig) -> Result<DriveCycle> {
    read_cycle(&cfg.cycles.train)
}

fn write_runs(runs: &[TrainRun], cfg: &ExperimentConfig, pre: &str) -> Result<()> {
    for run in runs {
        let tag = format!("{}_seed{}", run.initializer.name(), run.seed);
        let run_pre = format!("{pre}run = {tag}\n");
        write_file(&cfg.out.join(format!("{tag}_curve.csv")), &curve_csv(&run.outcome.records, &run_pre))?;
        write_file(&cfg.out.join(format!("{tag}_q.txt")), &run.outcome.q.to_text(&run_pre))?;
    }
    for init in Initializer::ALL {
        let curves: Vec<&[_]> =
            runs.iter().filter(|r| r.initializer == init).map(|r| r.outcome.records.as_slice()).collect();
        if !curves.is_empty() {
            let name = format!("{}_mean_curve.csv", init.name());
            write_file(&cfg.out.join(name), &mean_curve_csv(&curves, &format!("{pre}run = {} mean\n", init.name())))?;
        }
    }
    Ok(())
}

pub fn cmd_train(cfg: &ExperimentConfig) -> Result<String> {
    let env = cfg.env()?;
    let cycle = load_train_cycle(cfg)?;
    let runs = train_runs(cfg, &env, &cycle, &[cfg.initializer])?;
    let pre = preamble("train", cfg);
    write_runs(&runs, cfg, &pre)?;
    let mut msg = String::new();
    for run in &runs {
        let last = run.outcome.records.last().expect("at least one iteration");
        let updates = run.outcome.records.iter().filter(|r| r.updated).count();
        let mpg = last.greedy_mpg.map_or("n/a".into(), |m| format!("{m:.2}"));
        let _ = writeln!(
            msg,
            "{} seed {}: {} iterations, {updates} updates, greedy reward {:.6}, mpg {mpg}",
            run.initializer.name(),
            run.seed,
            last.iteration,
            last.greedy_reward_sum
        );
    }
    Ok(msg)
}

fn summary_text(cycle: &str, controller: &str, ep: &hev_core::qlearning::Episode) -> String {
    let mpg = ep.mpg.map_or("undefined".into(), |m| format!("{m:.3}"));
    format!(
        "{cycle} / {controller}: mpg {mpg}, final SOC {:.4}, max tracking error {:.3} mph, rms {:.3} mph\n",
        ep.final_soc,
        mps_to_mph(ep.max_tracking_error),
        mps_to_mph(ep.rms_tracking_error)
    )
}

pub fn cmd_eval(cfg: &ExperimentConfig, qtable: &Path) -> Result<String> {
    let q = read_qtable(qtable)?;
    let diff = q.discretization.diff(&cfg.discretization);
    if !diff.is_empty() {
        return Err(HarnessError::Validation(format!(
            "Q-table grid does not match the configured discretization (file vs config):\n  {}",
            diff.join("\n  ")
        )));
    }
    let env = cfg.env()?;
    let cycle = load_train_cycle(cfg)?;
    let ep = greedy_episode(&q, &cycle, &env).map_err(|e| HarnessError::Validation(e.to_string()))?;
    let name = cycle_stem(&cfg.cycles.train);
    let controller = cycle_stem(qtable);
    let pre = format!("{}qtable = {}\n", preamble("eval", cfg), qtable.display());
    write_file(&cfg.out.join(format!("eval_{controller}_{name}.csv")), &episode_csv(&ep, &pre))?;
    let summary = format!("{}{SUMMARY_HEADER}{}", comment_block(&pre), summary_row(&name, &controller, &ep));
    write_file(&cfg.out.join(format!("eval_{controller}_{name}_summary.csv")), &summary)?;
    Ok(summary_text(&name, &controller, &ep))
}

pub fn cmd_ecms_eval(cfg: &ExperimentConfig) -> Result<String> {
    let env = cfg.env()?;
    let cycle = load_train_cycle(cfg)?;
    let mut rng = seeded_rng(0);
    let ep = rollout(Policy::Ecms, &cycle, &env, &mut rng).map_err(|e| HarnessError::Validation(e.to_string()))?;
    let name = cycle_stem(&cfg.cycles.train);
    let pre = preamble("ecms-eval", cfg);
    write_file(&cfg.out.join(format!("ecms_{name}.csv")), &episode_csv(&ep, &pre))?;
    let summary = format!("{}{SUMMARY_HEADER}{}", comment_block(&pre), summary_row(&name, "ecms", &ep));
    write_file(&cfg.out.join(format!("ecms_{name}_summary.csv")), &summary)?;
    Ok(summary_text(&name, "ecms", &ep))
}

pub fn cmd_compare(cfg: &ExperimentConfig) -> Result<String> {
    let env = cfg.env()?;
    let cycle = load_train_cycle(cfg)?;
    let validate: Vec<(String, DriveCycle)> =
        cfg.cycles.validate.iter().map(|p| Ok((cycle_stem(p), read_cycle(p)?))).collect::<Result<_>>()?;
    let runs = train_runs(cfg, &env, &cycle, &Initializer::ALL)?;
    let pre = preamble("compare", cfg);
    write_runs(&runs, cfg, &pre)?;

    let report = ComparisonReport::build(&runs, cfg, &env, &cycle)?;
    write_file(&cfg.out.join("comparison.csv"), &report.to_csv(&pre))?;

    let first_seed = cfg.seeds[0];
    for init in Initializer::ALL {
        let initial = init
            .initial_table(&cycle, &env, &cfg.hyper_for(first_seed), &cfg.heuristic)
            .map_err(|e| HarnessError::Validation(e.to_string()))?;
        let map_pre = format!("{pre}run = {} seed {first_seed}\n", init.name());
        write_file(
            &cfg.out.join(format!("action_map_{}_initial.csv", init.name())),
            &action_map_csv(&optimal_action_map(&initial), &map_pre),
        )?;
        let trained = runs.iter().find(|r| r.initializer == init && r.seed == first_seed).expect("run exists");
        write_file(
            &cfg.out.join(format!("action_map_{}_trained.csv", init.name())),
            &action_map_csv(&optimal_action_map(&trained.outcome.q), &map_pre),
        )?;
    }

    let mut cross = format!("{}{SUMMARY_HEADER}", comment_block(&pre));
    let train_name = cycle_stem(&cfg.cycles.train);
    let mut all_cycles = vec![(train_name, cycle)];
    all_cycles.extend(validate);
    for (name, c) in &all_cycles {
        let (ecms, evals) = cross_cycle(&runs, &env, c)?;
        cross.push_str(&summary_row(name, "ecms", &ecms));
        for (tag, ep) in &evals {
            cross.push_str(&summary_row(name, tag, ep));
        }
    }
    write_file(&cfg.out.join("cross_cycle.csv"), &cross)?;

    let mut msg = String::new();
    for init in Initializer::ALL {
        let rows: Vec<_> = report.for_initializer(init).collect();
        let avg = |f: &dyn Fn(&crate::experiment::SeedSummary) -> Option<f64>| {
            let v: Vec<f64> = rows.iter().filter_map(|r| f(r)).collect();
            if v.is_empty() { f64::NAN } else { v.iter().sum::<f64>() / v.len() as f64 }
        };
        let _ = writeln!(
            msg,
            "{:<9} initial mpg {:.2}, final mpg {:.2}, final SOC {:.3}, iterations to threshold {:.1}",
            init.name(),
            avg(&|r| r.initial_mpg),
            avg(&|r| r.final_mpg),
            avg(&|r| Some(r.final_soc)),
            avg(&|r| Some(r.iterations_to_threshold as f64))
        );
    }
    let _ = writeln!(msg, "outputs written to {}", cfg.out.display());
    Ok(msg)
}

pub fn cmd_cycle_validate(common: &Common) -> Result<String> {
    let cfg = common.resolve()?;
    let c = read_cycle(&cfg.cycles.train)?;
    Ok(format!(
        "{}: {} samples, {:.0} s, max {:.2} mph, distance {:.3} km\n",
        cfg.cycles.train.display(),
        c.len(),
        (c.len() - 1) as f64 * c.dt(),
        mps_to_mph(c.max_speed()),
        c.distance() / 1000.0
    ))
}
