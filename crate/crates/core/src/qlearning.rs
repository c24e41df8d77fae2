//! Tabular Q-learning over a discretized (speed, torque demand) state space
//! with motor torque as the action, plus the closed-loop HEV environment the
//! agent is trained in.

use std::collections::hash_map::DefaultHasher;
use std::fmt::Write as _;
use std::hash::{Hash, Hasher};

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::driver_cycle::{driver_step, gear_compensated_pedal, torque_demand, DriveCycle, DriverGains, DriverState, PedalMap};
use crate::powertrain::{plant_step, ActuatorCommand, PlantState, Vehicle};
use crate::supervisory::{ecms_action, reward, split_demand, EcmsQuery, EquivalenceParams};
use crate::units::{miles_per_gallon, mph_to_mps};

#[derive(Debug, Error, PartialEq)]
pub enum QError {
    #[error("action index {index} out of range 0..{count}")]
    ActionIndex { index: usize, count: usize },
    #[error("invalid discretization: {0}")]
    InvalidDiscretization(String),
    #[error("invalid hyperparameters: {0}")]
    InvalidHyperparams(String),
    #[error("Q-table line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("grid mismatch: {0}")]
    GridMismatch(String),
    #[error("cycle needs at least two samples")]
    CycleTooShort,
}

/// State and action grids.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Discretization {
    pub speed_bins_mph: Vec<f64>,
    /// N*m, transmission-input frame
    pub torque_bins: Vec<f64>,
    /// Motor torques, N*m
    pub action_values: Vec<f64>,
    /// Action chosen when several share the maximum Q value.
    pub default_action: usize,
}

impl Default for Discretization {
    fn default() -> Self {
        Self {
            speed_bins_mph: (0..5).map(|k| 16.0 * k as f64).collect(),
            torque_bins: (0..5).map(|k| 100.0 * k as f64).collect(),
            action_values: uniform_grid(-100.0, 250.0, 20),
            default_action: 9,
        }
    }
}

/// `count` points from `lo` to `hi` inclusive; both endpoints are exact.
pub fn uniform_grid(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    match count {
        0 => Vec::new(),
        1 => vec![lo],
        _ => {
            let n = (count - 1) as f64;
            (0..count).map(|k| if k == count - 1 { hi } else { lo + k as f64 * (hi - lo) / n }).collect()
        }
    }
}

fn strictly_increasing(v: &[f64]) -> bool {
    v.iter().all(|x| x.is_finite()) && v.windows(2).all(|w| w[0] < w[1])
}

/// Index of the value in `bins` nearest to `x`; ties go to the lower bin.
fn nearest_bin(bins: &[f64], x: f64) -> usize {
    let mut best = 0;
    for (k, &b) in bins.iter().enumerate().skip(1) {
        if (x - b).abs() < (x - bins[best]).abs() {
            best = k;
        }
    }
    best
}

impl Discretization {
    pub fn validate(&self) -> Result<(), QError> {
        let bad = |m: &str| Err(QError::InvalidDiscretization(m.to_string()));
        for (name, v) in
            [("speed bins", &self.speed_bins_mph), ("torque bins", &self.torque_bins), ("actions", &self.action_values)]
        {
            if v.is_empty() {
                return bad(&format!("{name} empty"));
            }
            if !strictly_increasing(v) {
                return bad(&format!("{name} must be finite and strictly increasing"));
            }
        }
        if self.default_action >= self.action_values.len() {
            return bad("default action outside the action grid");
        }
        Ok(())
    }

    pub fn n_speed(&self) -> usize {
        self.speed_bins_mph.len()
    }

    pub fn n_torque(&self) -> usize {
        self.torque_bins.len()
    }

    pub fn n_states(&self) -> usize {
        self.n_speed() * self.n_torque()
    }

    pub fn n_actions(&self) -> usize {
        self.action_values.len()
    }

    pub fn state_index(&self, s: StateIndex) -> usize {
        s.speed * self.n_torque() + s.torque
    }

    pub fn discretize_state(&self, speed: f64, total_demand: f64) -> StateIndex {
        let speed_bins: Vec<f64> = self.speed_bins_mph.iter().map(|&b| mph_to_mps(b)).collect();
        StateIndex { speed: nearest_bin(&speed_bins, speed), torque: nearest_bin(&self.torque_bins, total_demand) }
    }

    pub fn action_torque(&self, index: usize) -> Result<f64, QError> {
        self.action_values
            .get(index)
            .copied()
            .ok_or(QError::ActionIndex { index, count: self.n_actions() })
    }

    /// Human-readable list of differing grids, empty when identical.
    pub fn diff(&self, other: &Discretization) -> Vec<String> {
        let mut out = Vec::new();
        let mut cmp = |name: &str, a: &[f64], b: &[f64]| {
            if a != b {
                out.push(format!("{name}: {} vs {}", join(a), join(b)));
            }
        };
        cmp("speed_bins_mph", &self.speed_bins_mph, &other.speed_bins_mph);
        cmp("torque_bins_nm", &self.torque_bins, &other.torque_bins);
        cmp("action_torques_nm", &self.action_values, &other.action_values);
        out
    }
}

/// Discrete state: indices into the speed and torque-demand grids.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct StateIndex {
    pub speed: usize,
    pub torque: usize,
}

/// Dense action-value table indexed by flat state and action.
#[derive(Debug, Clone, PartialEq)]
pub struct ActionValues {
    n_actions: usize,
    values: Vec<f64>,
}

impl ActionValues {
    pub fn zeros(n_states: usize, n_actions: usize) -> Self {
        Self { n_actions, values: vec![0.0; n_states * n_actions] }
    }

    pub fn n_states(&self) -> usize {
        self.values.len() / self.n_actions
    }

    pub fn n_actions(&self) -> usize {
        self.n_actions
    }

    pub fn get(&self, s: usize, a: usize) -> f64 {
        self.values[s * self.n_actions + a]
    }

    pub fn set(&mut self, s: usize, a: usize, v: f64) {
        self.values[s * self.n_actions + a] = v;
    }

    pub fn row(&self, s: usize) -> &[f64] {
        &self.values[s * self.n_actions..(s + 1) * self.n_actions]
    }

    pub fn max(&self, s: usize) -> f64 {
        self.row(s).iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.values
    }

    /// One temporal-difference update of cell (s, a). `next` is `None` for a
    /// terminal transition.
    pub fn update(&mut self, s: usize, a: usize, r: f64, next: Option<usize>, alpha: f64, gamma: f64) {
        let bootstrap = next.map_or(0.0, |sn| self.max(sn));
        let q = self.get(s, a);
        self.set(s, a, q + alpha * (r + gamma * bootstrap - q));
    }
}

/// Argmax over `row`, preferring `default` among maximizers and then the
/// lowest index.
pub fn greedy_index(row: &[f64], default: usize) -> usize {
    let best = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if row.get(default) == Some(&best) {
        return default;
    }
    row.iter().position(|&v| v == best).unwrap_or(default)
}

/// Epsilon-greedy choice. No random numbers are drawn when `epsilon` is 0.
pub fn select_from_row(row: &[f64], default: usize, epsilon: f64, rng: &mut ChaCha8Rng) -> usize {
    if epsilon > 0.0 && rng.gen::<f64>() < epsilon {
        rng.gen_range(0..row.len())
    } else {
        greedy_index(row, default)
    }
}

/// Q(s, a) over the HEV grids.
#[derive(Debug, Clone, PartialEq)]
pub struct QTable {
    pub discretization: Discretization,
    pub values: ActionValues,
}

impl QTable {
    pub fn zeros(d: &Discretization) -> Self {
        Self { discretization: d.clone(), values: ActionValues::zeros(d.n_states(), d.n_actions()) }
    }

    pub fn get(&self, s: StateIndex, a: usize) -> f64 {
        self.values.get(self.discretization.state_index(s), a)
    }

    pub fn set(&mut self, s: StateIndex, a: usize, v: f64) {
        let k = self.discretization.state_index(s);
        self.values.set(k, a, v);
    }

    pub fn row(&self, s: StateIndex) -> &[f64] {
        self.values.row(self.discretization.state_index(s))
    }

    pub fn greedy_action(&self, s: StateIndex) -> usize {
        greedy_index(self.row(s), self.discretization.default_action)
    }

    /// Stable within a process; used to detect whether a table changed.
    pub fn fingerprint(&self) -> u64 {
        let mut h = DefaultHasher::new();
        for v in self.values.as_slice() {
            v.to_bits().hash(&mut h);
        }
        h.finish()
    }

    pub fn all_finite(&self) -> bool {
        self.values.as_slice().iter().all(|v| v.is_finite())
    }

    /// Text form: grid header lines then one CSV row per cell. Values are
    /// written in shortest round-trip notation so parsing restores every
    /// bit. `preamble` lines are emitted as `#` comments first.
    pub fn to_text(&self, preamble: &str) -> String {
        let d = &self.discretization;
        let mut out = String::new();
        for line in preamble.lines() {
            let _ = writeln!(out, "# {line}");
        }
        let _ = writeln!(out, "speed_bins_mph={}", join(&d.speed_bins_mph));
        let _ = writeln!(out, "torque_bins_nm={}", join(&d.torque_bins));
        let _ = writeln!(out, "action_torques_nm={}", join(&d.action_values));
        let _ = writeln!(out, "default_action={}", d.default_action);
        out.push_str("speed_idx,torque_idx,action_idx,q_value\n");
        for i in 0..d.n_speed() {
            for j in 0..d.n_torque() {
                let s = StateIndex { speed: i, torque: j };
                for (a, v) in self.row(s).iter().enumerate() {
                    let _ = writeln!(out, "{i},{j},{a},{v:?}");
                }
            }
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self, QError> {
        let mut speed = None;
        let mut torque = None;
        let mut actions = None;
        let mut default = None;
        let mut rows: Vec<(usize, usize, usize, usize, f64)> = Vec::new();
        let mut saw_columns = false;
        for (k, raw) in text.lines().enumerate() {
            let line_no = k + 1;
            let perr = |m: String| QError::Parse { line: line_no, message: m };
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            if let Some((key, value)) = line.split_once('=') {
                match key.trim() {
                    "speed_bins_mph" => speed = Some(parse_list(value).map_err(perr)?),
                    "torque_bins_nm" => torque = Some(parse_list(value).map_err(perr)?),
                    "action_torques_nm" => actions = Some(parse_list(value).map_err(perr)?),
                    "default_action" => {
                        default = Some(value.trim().parse::<usize>().map_err(|e| perr(e.to_string()))?)
                    }
                    other => return Err(perr(format!("unknown header key '{other}'"))),
                }
                continue;
            }
            if line == "speed_idx,torque_idx,action_idx,q_value" {
                saw_columns = true;
                continue;
            }
            if !saw_columns {
                return Err(perr("data row before column header".into()));
            }
            let f: Vec<&str> = line.split(',').map(str::trim).collect();
            if f.len() != 4 {
                return Err(perr(format!("expected 4 fields, found {}", f.len())));
            }
            let idx = |s: &str| s.parse::<usize>().map_err(|e| perr(format!("bad index '{s}': {e}")));
            let v: f64 = f[3].parse().map_err(|e| perr(format!("bad value '{}': {e}", f[3])))?;
            if !v.is_finite() {
                return Err(perr("non-finite Q value".into()));
            }
            rows.push((line_no, idx(f[0])?, idx(f[1])?, idx(f[2])?, v));
        }
        let missing = |what: &str| QError::Parse { line: 0, message: format!("missing header '{what}'") };
        let d = Discretization {
            speed_bins_mph: speed.ok_or_else(|| missing("speed_bins_mph"))?,
            torque_bins: torque.ok_or_else(|| missing("torque_bins_nm"))?,
            action_values: actions.ok_or_else(|| missing("action_torques_nm"))?,
            default_action: default.ok_or_else(|| missing("default_action"))?,
        };
        d.validate()?;
        let mut q = QTable::zeros(&d);
        let mut seen = vec![false; d.n_states() * d.n_actions()];
        for (line, i, j, a, v) in rows {
            if i >= d.n_speed() || j >= d.n_torque() || a >= d.n_actions() {
                return Err(QError::Parse { line, message: format!("index ({i},{j},{a}) outside the grids") });
            }
            let flat = d.state_index(StateIndex { speed: i, torque: j }) * d.n_actions() + a;
            if std::mem::replace(&mut seen[flat], true) {
                return Err(QError::Parse { line, message: format!("duplicate cell ({i},{j},{a})") });
            }
            q.set(StateIndex { speed: i, torque: j }, a, v);
        }
        if let Some(pos) = seen.iter().position(|s| !s) {
            let (s, a) = (pos / d.n_actions(), pos % d.n_actions());
            return Err(QError::Parse {
                line: 0,
                message: format!("missing cell ({},{},{a})", s / d.n_torque(), s % d.n_torque()),
            });
        }
        Ok(q)
    }
}

fn join(v: &[f64]) -> String {
    v.iter().map(|x| format!("{x:?}")).collect::<Vec<_>>().join(",")
}

fn parse_list(s: &str) -> Result<Vec<f64>, String> {
    s.split(',').map(|t| t.trim().parse::<f64>().map_err(|e| format!("bad number '{}': {e}", t.trim()))).collect()
}

/// Epsilon-greedy action for a discrete state.
pub fn select_action(q: &QTable, s: StateIndex, epsilon: f64, rng: &mut ChaCha8Rng) -> usize {
    select_from_row(q.row(s), q.discretization.default_action, epsilon, rng)
}

/// Temporal-difference update of a single cell.
pub fn q_update(q: &mut QTable, s: StateIndex, a: usize, r: f64, s_next: Option<StateIndex>, alpha: f64, gamma: f64) {
    let d = &q.discretization;
    let (k, kn) = (d.state_index(s), s_next.map(|sn| d.state_index(sn)));
    q.values.update(k, a, r, kn, alpha, gamma);
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Hyperparams {
    pub alpha: f64,
    pub gamma: f64,
    pub epsilon: f64,
    pub iterations: usize,
    /// s
    pub dt: f64,
    pub seed: u64,
}

impl Default for Hyperparams {
    fn default() -> Self {
        Self { alpha: 0.1, gamma: 1.0, epsilon: 0.1, iterations: 500, dt: 1.0, seed: 0 }
    }
}

impl Hyperparams {
    pub fn validate(&self) -> Result<(), QError> {
        let bad = |m: &str| Err(QError::InvalidHyperparams(m.to_string()));
        if !(self.alpha > 0.0 && self.alpha <= 1.0) {
            return bad("alpha must lie in (0, 1]");
        }
        if !(0.0..=1.0).contains(&self.gamma) {
            return bad("gamma must lie in [0, 1]");
        }
        if !(0.0..=1.0).contains(&self.epsilon) {
            return bad("epsilon must lie in [0, 1]");
        }
        if self.iterations == 0 {
            return bad("iterations must be at least 1");
        }
        if !(self.dt > 0.0) {
            return bad("dt must be positive");
        }
        Ok(())
    }
}

/// Everything the closed-loop simulation needs besides the policy.
#[derive(Debug, Clone, PartialEq)]
pub struct HevEnv {
    pub vehicle: Vehicle,
    pub driver: DriverGains,
    pub pedal: PedalMap,
    pub equivalence: EquivalenceParams,
    pub discretization: Discretization,
    pub initial_soc: f64,
    /// kg/L
    pub fuel_density: f64,
    /// rad
    pub grade: f64,
}

impl HevEnv {
    pub fn new(vehicle: Vehicle, discretization: Discretization) -> Self {
        let equivalence = EquivalenceParams { fuel_lhv: vehicle.params.fuel_lhv, ..EquivalenceParams::default() };
        Self {
            vehicle,
            driver: DriverGains::default(),
            pedal: PedalMap::default(),
            equivalence,
            discretization,
            initial_soc: 0.6,
            fuel_density: 0.745,
            grade: 0.0,
        }
    }
}

impl Default for HevEnv {
    fn default() -> Self {
        Self::new(Vehicle::default(), Discretization::default())
    }
}

/// Supervisory policy used during a rollout. Braking steps bypass it.
#[derive(Debug, Clone, Copy)]
pub enum Policy<'a> {
    /// Epsilon-greedy on a Q-table; epsilon 0 is the greedy policy.
    Q { table: &'a QTable, epsilon: f64 },
    /// Equivalent-fuel minimization over the action grid.
    Ecms,
}

/// One simulated step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepRecord {
    /// s, at the start of the step
    pub time: f64,
    /// m/s, cycle speed at the start of the step
    pub ref_speed: f64,
    /// m/s, vehicle speed at the start of the step
    pub speed: f64,
    pub soc: f64,
    pub gear: u8,
    pub state: StateIndex,
    /// `None` on braking steps, where the policy was not consulted.
    pub action: Option<usize>,
    /// N*m, transmission-input frame
    pub total_demand: f64,
    /// N*m, motor frame
    pub brake_torque: f64,
    pub engine_torque: f64,
    pub em_torque: f64,
    /// kg/s
    pub fuel_rate: f64,
    /// W
    pub battery_power: f64,
    pub reward: f64,
    /// m/s, after the step
    pub next_speed: f64,
    pub next_soc: f64,
}

impl StepRecord {
    pub fn is_braking(&self) -> bool {
        self.action.is_none()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Episode {
    pub steps: Vec<StepRecord>,
    pub reward_sum: f64,
    /// kg
    pub fuel_mass: f64,
    /// m, trapezoidal integral of the simulated speed
    pub distance: f64,
    /// `None` when no distance was covered or no fuel burned.
    pub mpg: Option<f64>,
    pub final_soc: f64,
    /// Steps whose reward was not strictly positive.
    pub nonpositive_rewards: usize,
    /// m/s, over every cycle sample
    pub max_tracking_error: f64,
    pub rms_tracking_error: f64,
}

/// Closed-loop simulation of `cycle` under `policy`.
///
/// At each step the driver tracks the cycle speed one sample ahead, the
/// pedal is mapped to a torque demand, the policy picks a motor torque (or
/// the brake is routed to the motor when the pedal is negative) and the
/// plant advances by one sample period.
pub fn rollout(policy: Policy<'_>, cycle: &DriveCycle, env: &HevEnv, rng: &mut ChaCha8Rng) -> Result<Episode, QError> {
    if cycle.len() < 2 {
        return Err(QError::CycleTooShort);
    }
    let dt = cycle.dt();
    let d = &env.discretization;
    let mut plant = PlantState { speed: cycle.ref_speeds[0], soc: env.initial_soc, gear: 1, time: cycle.timestamps[0] };
    plant.gear = crate::powertrain::select_gear(plant.speed, 1, &env.vehicle.params);
    let mut driver = DriverState::new(env.driver);
    let mut steps = Vec::with_capacity(cycle.len() - 1);
    let (mut reward_sum, mut fuel_mass, mut distance) = (0.0, 0.0, 0.0);
    let mut nonpositive = 0;
    let mut sq_err = 0.0;
    let first_err = (cycle.ref_speeds[0] - plant.speed).abs();
    let mut max_err = first_err;
    sq_err += first_err * first_err;

    for j in 0..cycle.len() - 1 {
        let target = cycle.ref_speeds[j + 1];
        let (pedal, next_driver) = driver_step(target, plant.speed, &driver, dt);
        driver = next_driver;
        let pedal = gear_compensated_pedal(pedal, env.vehicle.params.gear_ratio(plant.gear), &env.pedal);
        let demand = torque_demand(pedal, &env.pedal);
        let state = d.discretize_state(plant.speed, demand.total_demand);

        let (action, cmd) = if demand.is_braking() {
            (None, ActuatorCommand { engine_torque: 0.0, em_torque: 0.0, brake_torque: demand.brake_torque })
        } else {
            let a = match policy {
                Policy::Q { table, epsilon } => select_action(table, state, epsilon, rng),
                Policy::Ecms => {
                    let query = EcmsQuery {
                        speed: plant.speed,
                        gear: plant.gear,
                        soc: plant.soc,
                        total_demand: demand.total_demand,
                        dt,
                    };
                    ecms_action(&query, &d.action_values, &env.vehicle, &env.equivalence).action_index
                }
            };
            let split = split_demand(d.action_values[a], demand.total_demand, plant.gear, &env.vehicle);
            (Some(a), ActuatorCommand { engine_torque: split.engine_torque, em_torque: split.em_torque, brake_torque: 0.0 })
        };

        let out = plant_step(&plant, &cmd, env.grade, dt, &env.vehicle);
        let r = reward(out.fuel_rate_engine, out.battery_power, dt, &env.equivalence);
        if r <= 0.0 {
            nonpositive += 1;
        }
        reward_sum += r;
        fuel_mass += out.fuel_rate_engine * dt;
        distance += 0.5 * (plant.speed + out.next_state.speed) * dt;
        steps.push(StepRecord {
            time: plant.time,
            ref_speed: cycle.ref_speeds[j],
            speed: plant.speed,
            soc: plant.soc,
            gear: plant.gear,
            state,
            action,
            total_demand: demand.total_demand,
            brake_torque: demand.brake_torque,
            engine_torque: out.actual_engine_torque,
            em_torque: out.actual_em_torque,
            fuel_rate: out.fuel_rate_engine,
            battery_power: out.battery_power,
            reward: r,
            next_speed: out.next_state.speed,
            next_soc: out.next_state.soc,
        });
        plant = out.next_state;
        let err = (target - plant.speed).abs();
        max_err = max_err.max(err);
        sq_err += err * err;
    }
    Ok(Episode {
        mpg: miles_per_gallon(distance, fuel_mass, env.fuel_density),
        final_soc: plant.soc,
        reward_sum,
        fuel_mass,
        distance,
        nonpositive_rewards: nonpositive,
        max_tracking_error: max_err,
        rms_tracking_error: (sq_err / cycle.len() as f64).sqrt(),
        steps,
    })
}

/// Replays `episode` through the update rule in time order, skipping braking
/// steps. The last step is terminal. Returns the number of updates applied.
pub fn replay(q: &mut QTable, episode: &Episode, alpha: f64, gamma: f64) -> usize {
    let mut applied = 0;
    for (j, st) in episode.steps.iter().enumerate() {
        let Some(a) = st.action else { continue };
        let next = episode.steps.get(j + 1).map(|n| n.state);
        q_update(q, st.state, a, st.reward, next, alpha, gamma);
        applied += 1;
    }
    applied
}

/// Greedy rollout: reward sum and fuel economy.
pub fn evaluate_greedy(q: &QTable, cycle: &DriveCycle, env: &HevEnv) -> Result<(f64, Option<f64>), QError> {
    let ep = greedy_episode(q, cycle, env)?;
    Ok((ep.reward_sum, ep.mpg))
}

/// Full greedy episode. The RNG is never consulted at epsilon 0.
pub fn greedy_episode(q: &QTable, cycle: &DriveCycle, env: &HevEnv) -> Result<Episode, QError> {
    let mut rng = seeded_rng(0);
    rollout(Policy::Q { table: q, epsilon: 0.0 }, cycle, env, &mut rng)
}

pub fn seeded_rng(seed: u64) -> ChaCha8Rng {
    use rand::SeedableRng;
    ChaCha8Rng::seed_from_u64(seed)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LearningRecord {
    /// 1-based
    pub iteration: usize,
    pub exploratory_reward_sum: f64,
    /// Reward sum of the greedy rollout at the most recent update.
    pub greedy_reward_sum: f64,
    pub greedy_mpg: Option<f64>,
    pub updated: bool,
}

/// How the first training iteration's exploratory episode is produced.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FirstEpisode {
    /// Ordinary epsilon-greedy exploration.
    EpsilonGreedy,
    /// Greedy on the initial table.
    Greedy,
    /// The ECMS controller.
    Ecms,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainOutcome {
    pub q: QTable,
    pub records: Vec<LearningRecord>,
}

/// Experience-filtered Q-learning: an exploratory episode is replayed into
/// the table only when its reward sum beats the best greedy reward sum seen
/// at the last update, after which a fresh greedy rollout resets that bar.
///
/// `on_iteration` is called after every iteration with the record and the
/// current table.
pub fn train_with<F: FnMut(&LearningRecord, &QTable)>(
    init: QTable,
    cycle: &DriveCycle,
    hyper: &Hyperparams,
    env: &HevEnv,
    first: FirstEpisode,
    mut on_iteration: F,
) -> Result<TrainOutcome, QError> {
    hyper.validate()?;
    let mut rng = seeded_rng(hyper.seed);
    let mut q = init;
    let mut r_tot = 0.0;
    let mut mpg = None;
    let mut records = Vec::with_capacity(hyper.iterations);
    for i in 1..=hyper.iterations {
        let policy = match (i, first) {
            (1, FirstEpisode::Ecms) => Policy::Ecms,
            (1, FirstEpisode::Greedy) => Policy::Q { table: &q, epsilon: 0.0 },
            _ => Policy::Q { table: &q, epsilon: hyper.epsilon },
        };
        let explore = rollout(policy, cycle, env, &mut rng)?;
        let updated = explore.reward_sum > r_tot;
        if updated {
            replay(&mut q, &explore, hyper.alpha, hyper.gamma);
            let greedy = greedy_episode(&q, cycle, env)?;
            r_tot = greedy.reward_sum;
            mpg = greedy.mpg;
        }
        let rec = LearningRecord {
            iteration: i,
            exploratory_reward_sum: explore.reward_sum,
            greedy_reward_sum: r_tot,
            greedy_mpg: mpg,
            updated,
        };
        on_iteration(&rec, &q);
        records.push(rec);
    }
    Ok(TrainOutcome { q, records })
}

pub fn train(
    init: QTable,
    cycle: &DriveCycle,
    hyper: &Hyperparams,
    env: &HevEnv,
    first: FirstEpisode,
) -> Result<TrainOutcome, QError> {
    train_with(init, cycle, hyper, env, first, |_, _| {})
}

/// Minimal episodic environment for checking the learner against exact
/// dynamic programming.
pub trait TabularEnv {
    fn n_states(&self) -> usize;
    fn n_actions(&self) -> usize;
    /// Deterministic transition: reward and next state (`None` = terminal).
    fn step(&self, s: usize, a: usize) -> (f64, Option<usize>);
    /// Start state of a new episode.
    fn reset(&self, rng: &mut ChaCha8Rng) -> usize;
}

/// Online epsilon-greedy Q-learning for `steps` environment steps.
pub fn q_learning_online<E: TabularEnv>(
    env: &E,
    alpha: f64,
    gamma: f64,
    epsilon: f64,
    steps: usize,
    rng: &mut ChaCha8Rng,
) -> ActionValues {
    let mut q = ActionValues::zeros(env.n_states(), env.n_actions());
    let mut s = env.reset(rng);
    for _ in 0..steps {
        let a = select_from_row(q.row(s), 0, epsilon, rng);
        let (r, next) = env.step(s, a);
        q.update(s, a, r, next, alpha, gamma);
        s = match next {
            Some(n) => n,
            None => env.reset(rng),
        };
    }
    q
}

/// Optimal action values by value iteration, to `tol` in the sup norm.
pub fn value_iteration<E: TabularEnv>(env: &E, gamma: f64, tol: f64) -> ActionValues {
    let mut q = ActionValues::zeros(env.n_states(), env.n_actions());
    loop {
        let mut next = q.clone();
        let mut delta: f64 = 0.0;
        for s in 0..env.n_states() {
            for a in 0..env.n_actions() {
                let (r, sn) = env.step(s, a);
                let v = r + gamma * sn.map_or(0.0, |n| q.max(n));
                delta = delta.max((v - q.get(s, a)).abs());
                next.set(s, a, v);
            }
        }
        q = next;
        if delta < tol {
            return q;
        }
    }
}

/// Five-cell corridor: action 0 moves right, action 1 moves left (the left
/// wall reflects). Stepping right out of the last cell pays 1 and ends the episode.
/// Episodes start in a uniformly random cell.
#[derive(Debug, Clone, Copy, Default)]
pub struct ChainMdp;

impl TabularEnv for ChainMdp {
    fn n_states(&self) -> usize {
        5
    }

    fn n_actions(&self) -> usize {
        2
    }

    fn step(&self, s: usize, a: usize) -> (f64, Option<usize>) {
        match a {
            0 if s + 1 == self.n_states() => (1.0, None),
            0 => (0.0, Some(s + 1)),
            _ => (0.0, Some(s.saturating_sub(1))),
        }
    }

    fn reset(&self, rng: &mut ChaCha8Rng) -> usize {
        rng.gen_range(0..self.n_states())
    }
}
