//! Q-table initializers: all-zero, rule-based seeding, and seeding from one
//! ECMS-controlled episode.

use std::fmt::Write as _;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::driver_cycle::DriveCycle;
use crate::qlearning::{replay, rollout, seeded_rng, FirstEpisode, HevEnv, Hyperparams, Policy, QError, QTable, StateIndex};

/// Seeds a constant value into low-speed, high-demand, high-torque cells.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HeuristicRule {
    pub speed_threshold_mph: f64,
    /// N*m
    pub demand_threshold: f64,
    /// N*m
    pub em_torque_threshold: f64,
    pub seed_value: f64,
}

impl Default for HeuristicRule {
    fn default() -> Self {
        Self { speed_threshold_mph: 20.0, demand_threshold: 50.0, em_torque_threshold: 200.0, seed_value: 1.0 }
    }
}

impl HeuristicRule {
    pub fn validate(&self) -> Result<(), String> {
        if !(self.seed_value > 0.0 && self.seed_value.is_finite()) {
            return Err("heuristic seed value must be positive".into());
        }
        if !(self.speed_threshold_mph.is_finite() && self.demand_threshold.is_finite() && self.em_torque_threshold.is_finite()) {
            return Err("heuristic thresholds must be finite".into());
        }
        Ok(())
    }
}

/// Which initializer a training run starts from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Initializer {
    Cold,
    Heuristic,
    Ecms,
}

impl Initializer {
    pub const ALL: [Initializer; 3] = [Initializer::Cold, Initializer::Heuristic, Initializer::Ecms];

    pub fn name(self) -> &'static str {
        match self {
            Initializer::Cold => "cold",
            Initializer::Heuristic => "heuristic",
            Initializer::Ecms => "ecms",
        }
    }

    /// Table handed to training and the controller that produces the first
    /// exploratory episode. The ECMS start begins from zeros; its first
    /// episode is driven by ECMS and replayed, which yields
    /// [`ecms_warmstart`]'s table after iteration 1.
    pub fn training_start(self, env: &HevEnv, rule: &HeuristicRule) -> (QTable, FirstEpisode) {
        let d = &env.discretization;
        match self {
            Initializer::Cold => (cold_init(d), FirstEpisode::EpsilonGreedy),
            Initializer::Heuristic => (heuristic_init(d, rule), FirstEpisode::Greedy),
            Initializer::Ecms => (cold_init(d), FirstEpisode::Ecms),
        }
    }

    /// The table this initializer produces before any exploration.
    pub fn initial_table(self, cycle: &DriveCycle, env: &HevEnv, hyper: &Hyperparams, rule: &HeuristicRule) -> Result<QTable, QError> {
        match self {
            Initializer::Cold => Ok(cold_init(&env.discretization)),
            Initializer::Heuristic => Ok(heuristic_init(&env.discretization, rule)),
            Initializer::Ecms => ecms_warmstart(cycle, env, hyper),
        }
    }
}

impl FromStr for Initializer {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "cold" => Ok(Initializer::Cold),
            "heuristic" => Ok(Initializer::Heuristic),
            "ecms" => Ok(Initializer::Ecms),
            other => Err(format!("unknown initializer '{other}' (expected cold, heuristic or ecms)")),
        }
    }
}

pub fn cold_init(d: &crate::qlearning::Discretization) -> QTable {
    QTable::zeros(d)
}

pub fn heuristic_init(d: &crate::qlearning::Discretization, rule: &HeuristicRule) -> QTable {
    let mut q = QTable::zeros(d);
    for (i, &v) in d.speed_bins_mph.iter().enumerate() {
        if v >= rule.speed_threshold_mph {
            continue;
        }
        for (j, &t) in d.torque_bins.iter().enumerate() {
            if t <= rule.demand_threshold {
                continue;
            }
            for (a, &em) in d.action_values.iter().enumerate() {
                if em >= rule.em_torque_threshold {
                    q.set(StateIndex { speed: i, torque: j }, a, rule.seed_value);
                }
            }
        }
    }
    q
}

/// One ECMS-controlled episode replayed onto a zero table.
pub fn ecms_warmstart(cycle: &DriveCycle, env: &HevEnv, hyper: &Hyperparams) -> Result<QTable, QError> {
    let mut rng = seeded_rng(hyper.seed);
    let episode = rollout(Policy::Ecms, cycle, env, &mut rng)?;
    let mut q = cold_init(&env.discretization);
    replay(&mut q, &episode, hyper.alpha, hyper.gamma);
    Ok(q)
}

/// One row of the greedy action map.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ActionMapEntry {
    pub speed_mph: f64,
    pub torque_demand: f64,
    pub best_em_torque: f64,
}

/// Greedy motor torque for every state, speed-major.
pub fn optimal_action_map(q: &QTable) -> Vec<ActionMapEntry> {
    let d = &q.discretization;
    let mut out = Vec::with_capacity(d.n_states());
    for (i, &speed_mph) in d.speed_bins_mph.iter().enumerate() {
        for (j, &torque_demand) in d.torque_bins.iter().enumerate() {
            let a = q.greedy_action(StateIndex { speed: i, torque: j });
            out.push(ActionMapEntry { speed_mph, torque_demand, best_em_torque: d.action_values[a] });
        }
    }
    out
}

/// CSV form of an action map, preceded by `#` comment lines.
pub fn action_map_csv(map: &[ActionMapEntry], preamble: &str) -> String {
    let mut out = String::new();
    for line in preamble.lines() {
        let _ = writeln!(out, "# {line}");
    }
    out.push_str("speed_mph,torque_demand_nm,best_em_torque_nm\n");
    for e in map {
        let _ = writeln!(out, "{:?},{:?},{:?}", e.speed_mph, e.torque_demand, e.best_em_torque);
    }
    out
}
