//! Lookup tables for the engine fuel map and the motor efficiency map.
//!
//! Both maps are synthesized from a handful of parameters so a config file
//! can describe them in a few lines; the built tables are what the plant
//! interpolates at run time.

use serde::{Deserialize, Serialize};

use super::PowertrainError;
use crate::units::{rad_s_to_rpm, rpm_to_rad_s};

/// Result of a table lookup. `clamped` is set when the query fell outside
/// the grid hull and was projected back onto its boundary.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Lookup {
    pub value: f64,
    pub clamped: bool,
}

/// Bilinear table over a rectangular grid, row-major in `xs`.
#[derive(Debug, Clone, PartialEq)]
pub struct Table2d {
    xs: Vec<f64>,
    ys: Vec<f64>,
    values: Vec<f64>,
}

impl Table2d {
    pub fn new(xs: Vec<f64>, ys: Vec<f64>, values: Vec<f64>) -> Result<Self, PowertrainError> {
        if xs.len() < 2 || ys.len() < 2 {
            return Err(PowertrainError::InvalidMap("grid needs at least two points per axis".into()));
        }
        if !strictly_increasing(&xs) || !strictly_increasing(&ys) {
            return Err(PowertrainError::InvalidMap("grid axes must be strictly increasing".into()));
        }
        if values.len() != xs.len() * ys.len() {
            return Err(PowertrainError::InvalidMap(format!(
                "table has {} values, grid needs {}",
                values.len(),
                xs.len() * ys.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(PowertrainError::InvalidMap("table contains non-finite values".into()));
        }
        Ok(Self { xs, ys, values })
    }

    /// Tabulates `f` on the grid.
    pub fn from_fn(xs: Vec<f64>, ys: Vec<f64>, f: impl Fn(f64, f64) -> f64) -> Result<Self, PowertrainError> {
        let values = xs.iter().flat_map(|&x| ys.iter().map(move |&y| (x, y))).map(|(x, y)| f(x, y)).collect();
        Self::new(xs, ys, values)
    }

    pub fn xs(&self) -> &[f64] {
        &self.xs
    }

    pub fn ys(&self) -> &[f64] {
        &self.ys
    }

    pub fn at(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.ys.len() + j]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Bilinear interpolation. Exact at grid nodes.
    pub fn lookup(&self, x: f64, y: f64) -> Lookup {
        let (i, fx, cx) = bracket(&self.xs, x);
        let (j, fy, cy) = bracket(&self.ys, y);
        let lo = lerp(self.at(i, j), self.at(i, j + 1), fy);
        let hi = lerp(self.at(i + 1, j), self.at(i + 1, j + 1), fy);
        Lookup { value: lerp(lo, hi, fx), clamped: cx || cy }
    }
}

// Convex form so that t = 0 and t = 1 reproduce the endpoints bit for bit.
fn lerp(a: f64, b: f64, t: f64) -> f64 {
    (1.0 - t) * a + t * b
}

fn strictly_increasing(v: &[f64]) -> bool {
    v.windows(2).all(|w| w[0] < w[1]) && v.iter().all(|x| x.is_finite())
}

/// Lower cell index, fractional position within the cell, and whether the
/// query was clamped onto the hull.
fn bracket(grid: &[f64], x: f64) -> (usize, f64, bool) {
    let last = grid.len() - 1;
    if x.is_nan() || x <= grid[0] {
        return (0, 0.0, x.is_nan() || x < grid[0]);
    }
    if x >= grid[last] {
        return (last - 1, 1.0, x > grid[last]);
    }
    let upper = grid.partition_point(|&g| g <= x);
    let i = upper - 1;
    if x == grid[i] {
        return (i, 0.0, false);
    }
    (i, (x - grid[i]) / (grid[i + 1] - grid[i]), false)
}

fn uniform_grid(start: f64, stop: f64, step: f64) -> Vec<f64> {
    let n = ((stop - start) / step).round() as usize;
    (0..=n).map(|k| if k == n { stop } else { start + k as f64 * step }).collect()
}

/// Parameters of the synthetic engine fuel map.
///
/// Fuel power follows a Willans line with a speed-dependent friction torque
/// and a full-load enrichment penalty above `enrichment_knee`:
///
/// `mdot * Q_LHV * peak_efficiency = w*T + w*T_f(w) + w*c*max(T - knee, 0)^2`
///
/// with `T_f(w) = friction_torque + friction_torque_speed * (w / w_max)^2`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EngineMapSpec {
    pub peak_efficiency: f64,
    /// N*m
    pub friction_torque: f64,
    /// N*m added at maximum speed (quadratic in speed)
    pub friction_torque_speed: f64,
    /// N*m
    pub enrichment_knee: f64,
    /// 1/(N*m)
    pub enrichment_coefficient: f64,
    /// Lowest tabulated speed; the engine idles here.
    pub speed_min_rpm: f64,
    pub speed_step_rpm: f64,
    pub torque_step: f64,
}

impl Default for EngineMapSpec {
    fn default() -> Self {
        Self {
            peak_efficiency: 0.32,
            friction_torque: 3.0,
            friction_torque_speed: 5.0,
            enrichment_knee: 80.0,
            enrichment_coefficient: 0.012,
            speed_min_rpm: 800.0,
            speed_step_rpm: 200.0,
            torque_step: 5.0,
        }
    }
}

/// Engine fuel-rate map (kg/s over rad/s x N*m) with its full-load curve.
#[derive(Debug, Clone, PartialEq)]
pub struct EngineMap {
    fuel_rate: Table2d,
    max_torque: f64,
    max_power: f64,
}

impl EngineMap {
    /// Tabulates the map from idle up to `max_speed` (rad/s) and from zero
    /// up to `max_torque`.
    pub fn synthetic(
        spec: &EngineMapSpec,
        max_torque: f64,
        max_power: f64,
        max_speed: f64,
        fuel_lhv: f64,
    ) -> Result<Self, PowertrainError> {
        if !(spec.peak_efficiency > 0.0 && spec.peak_efficiency <= 1.0) {
            return Err(PowertrainError::InvalidMap("engine peak efficiency must lie in (0, 1]".into()));
        }
        if spec.friction_torque < 0.0 || spec.friction_torque_speed < 0.0 || spec.enrichment_coefficient < 0.0 {
            return Err(PowertrainError::InvalidMap("engine loss terms must be non-negative".into()));
        }
        if !(spec.speed_step_rpm > 0.0 && spec.torque_step > 0.0) {
            return Err(PowertrainError::InvalidMap("engine grid steps must be positive".into()));
        }
        let speeds: Vec<f64> = uniform_grid(spec.speed_min_rpm, rad_s_to_rpm(max_speed), spec.speed_step_rpm)
            .into_iter()
            .map(rpm_to_rad_s)
            .collect();
        let torques = uniform_grid(0.0, max_torque, spec.torque_step);
        let w_max = max_speed;
        let fuel_rate = Table2d::from_fn(speeds, torques, |w, t| {
            let friction = spec.friction_torque + spec.friction_torque_speed * (w / w_max).powi(2);
            let rich = (t - spec.enrichment_knee).max(0.0);
            let shaft_and_losses = w * (t + friction + spec.enrichment_coefficient * rich * rich);
            shaft_and_losses / (spec.peak_efficiency * fuel_lhv)
        })?;
        Self::from_table(fuel_rate, max_torque, max_power)
    }

    pub fn from_table(fuel_rate: Table2d, max_torque: f64, max_power: f64) -> Result<Self, PowertrainError> {
        if fuel_rate.values().iter().any(|&v| v < 0.0) {
            return Err(PowertrainError::InvalidMap("fuel rate must be non-negative".into()));
        }
        let ny = fuel_rate.ys().len();
        for row in fuel_rate.values().chunks(ny) {
            if row.windows(2).any(|w| w[1] < w[0]) {
                return Err(PowertrainError::InvalidMap("fuel rate must be non-decreasing in torque".into()));
            }
        }
        Ok(Self { fuel_rate, max_torque, max_power })
    }

    pub fn table(&self) -> &Table2d {
        &self.fuel_rate
    }

    pub fn speed_grid(&self) -> &[f64] {
        self.fuel_rate.xs()
    }

    pub fn torque_grid(&self) -> &[f64] {
        self.fuel_rate.ys()
    }

    pub fn idle_speed(&self) -> f64 {
        self.fuel_rate.xs()[0]
    }

    pub fn max_speed(&self) -> f64 {
        *self.fuel_rate.xs().last().unwrap()
    }

    /// Full-load torque at `speed` (rad/s): flat at the rated torque, then
    /// power limited. Below idle the engine runs on the clutch at idle speed.
    pub fn max_torque_at(&self, speed: f64) -> f64 {
        if speed > self.max_speed() {
            return 0.0;
        }
        let w = speed.max(self.idle_speed());
        self.max_torque.min(self.max_power / w)
    }

    /// Fuel rate in kg/s; zero torque means the engine is fuel-cut.
    pub fn fuel_rate(&self, speed: f64, torque: f64) -> Lookup {
        if torque <= 0.0 {
            return Lookup { value: 0.0, clamped: false };
        }
        self.fuel_rate.lookup(speed, torque)
    }

    /// Brake efficiency implied by the table at a grid node.
    pub fn node_efficiency(&self, i: usize, j: usize, fuel_lhv: f64) -> f64 {
        let w = self.speed_grid()[i];
        let t = self.torque_grid()[j];
        let mdot = self.fuel_rate.at(i, j);
        if mdot == 0.0 {
            0.0
        } else {
            w * t / (mdot * fuel_lhv)
        }
    }
}

/// Parameters of the synthetic motor efficiency map: a bowl peaking at
/// `peak_efficiency` at mid speed and mid torque, decaying to
/// `edge_efficiency` at the corners, identical for motoring and generating.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MotorMapSpec {
    pub peak_efficiency: f64,
    pub edge_efficiency: f64,
    /// rad/s
    pub max_speed: f64,
    /// rad/s
    pub speed_step: f64,
    /// N*m
    pub torque_step: f64,
}

impl Default for MotorMapSpec {
    fn default() -> Self {
        Self { peak_efficiency: 0.92, edge_efficiency: 0.80, max_speed: 650.0, speed_step: 25.0, torque_step: 25.0 }
    }
}

/// Motor efficiency (electrical <-> mechanical) over rad/s x N*m.
#[derive(Debug, Clone, PartialEq)]
pub struct MotorMap {
    efficiency: Table2d,
}

impl MotorMap {
    pub fn synthetic(spec: &MotorMapSpec, max_torque: f64) -> Result<Self, PowertrainError> {
        if !(0.0 < spec.edge_efficiency && spec.edge_efficiency <= spec.peak_efficiency && spec.peak_efficiency <= 1.0) {
            return Err(PowertrainError::InvalidMap("motor efficiencies must satisfy 0 < edge <= peak <= 1".into()));
        }
        if !(spec.max_speed > 0.0 && spec.speed_step > 0.0 && spec.torque_step > 0.0 && max_torque > 0.0) {
            return Err(PowertrainError::InvalidMap("motor grid must be positive".into()));
        }
        let speeds = uniform_grid(0.0, spec.max_speed, spec.speed_step);
        let half = uniform_grid(0.0, max_torque, spec.torque_step);
        let torques: Vec<f64> = half.iter().rev().map(|t| -t).chain(half.iter().skip(1).copied()).collect();
        let span = spec.peak_efficiency - spec.edge_efficiency;
        let efficiency = Table2d::from_fn(speeds, torques, |w, t| {
            let ds = (w / spec.max_speed - 0.5) / 0.5;
            let dt = (t.abs() / max_torque - 0.5) / 0.5;
            spec.peak_efficiency - span * (ds * ds).max(dt * dt)
        })?;
        Self::from_table(efficiency)
    }

    pub fn from_table(efficiency: Table2d) -> Result<Self, PowertrainError> {
        if efficiency.values().iter().any(|&e| !(e > 0.0 && e <= 1.0)) {
            return Err(PowertrainError::InvalidMap("motor efficiency must lie in (0, 1]".into()));
        }
        Ok(Self { efficiency })
    }

    pub fn table(&self) -> &Table2d {
        &self.efficiency
    }

    pub fn efficiency(&self, speed: f64, torque: f64) -> Lookup {
        self.efficiency.lookup(speed.abs(), torque)
    }
}
