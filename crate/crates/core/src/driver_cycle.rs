//! Drive-cycle files and the PID driver that turns speed error into pedal
//! positions and torque requests.

use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::units::mph_to_mps;

#[derive(Debug, Error, PartialEq)]
pub enum CycleError {
    #[error("cannot read cycle file {path}: {message}")]
    Io { path: String, message: String },
    #[error("missing header: expected `time_s,speed_mph` or `time_s,speed_mps`, found `{0}`")]
    MissingHeader(String),
    #[error("malformed row {row}: {message}")]
    Malformed { row: usize, message: String },
    #[error("negative speed at row {row}")]
    NegativeSpeed { row: usize },
    #[error("non-uniform timestep at row {row}")]
    NonUniformTimestep { row: usize },
    #[error("cycle needs at least two samples, found {0}")]
    TooShort(usize),
}

/// Sample spacing of every cycle file, s.
pub const CYCLE_TIMESTEP: f64 = 1.0;

/// A reference speed trace sampled once per second.
#[derive(Debug, Clone, PartialEq)]
pub struct DriveCycle {
    pub name: String,
    /// s
    pub timestamps: Vec<f64>,
    /// m/s
    pub ref_speeds: Vec<f64>,
}

impl DriveCycle {
    /// Builds a cycle from speeds in m/s, one per second.
    pub fn from_speeds(name: impl Into<String>, speeds: Vec<f64>) -> Result<Self, CycleError> {
        let timestamps = (0..speeds.len()).map(|k| k as f64 * CYCLE_TIMESTEP).collect();
        let cycle = Self { name: name.into(), timestamps, ref_speeds: speeds };
        cycle.validate()?;
        Ok(cycle)
    }

    pub fn len(&self) -> usize {
        self.ref_speeds.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ref_speeds.is_empty()
    }

    pub fn dt(&self) -> f64 {
        self.timestamps[1] - self.timestamps[0]
    }

    /// Distance in meters of the reference trace (trapezoidal).
    pub fn distance(&self) -> f64 {
        self.ref_speeds.windows(2).map(|w| 0.5 * (w[0] + w[1]) * self.dt()).sum()
    }

    pub fn max_speed(&self) -> f64 {
        self.ref_speeds.iter().copied().fold(0.0, f64::max)
    }

    fn validate(&self) -> Result<(), CycleError> {
        if self.len() < 2 {
            return Err(CycleError::TooShort(self.len()));
        }
        if let Some(k) = self.ref_speeds.iter().position(|&v| !(v >= 0.0)) {
            return Err(CycleError::NegativeSpeed { row: k + 1 });
        }
        match self.timestamps.windows(2).position(|w| !uniform_step(w[0], w[1])) {
            Some(k) => Err(CycleError::NonUniformTimestep { row: k + 2 }),
            None => Ok(()),
        }
    }
}

fn uniform_step(prev: f64, next: f64) -> bool {
    ((next - prev) - CYCLE_TIMESTEP).abs() <= 1e-9
}

/// Reads a cycle CSV. Rows are numbered from 1 after the header.
pub fn parse_cycle(name: &str, text: &str) -> Result<DriveCycle, CycleError> {
    let mut lines = text.lines().filter(|l| !l.trim().is_empty() && !l.starts_with('#'));
    let header = lines.next().unwrap_or("").trim();
    let to_mps: fn(f64) -> f64 = match header.replace(' ', "").as_str() {
        "time_s,speed_mph" => mph_to_mps,
        "time_s,speed_mps" => |v| v,
        _ => return Err(CycleError::MissingHeader(header.to_string())),
    };
    let mut timestamps = Vec::new();
    let mut speeds = Vec::new();
    for (k, line) in lines.enumerate() {
        let row = k + 1;
        let mut fields = line.split(',').map(str::trim);
        let (Some(t), Some(v), None) = (fields.next(), fields.next(), fields.next()) else {
            return Err(CycleError::Malformed { row, message: "expected two fields".into() });
        };
        let parse = |s: &str| s.parse::<f64>().map_err(|e| CycleError::Malformed { row, message: format!("`{s}`: {e}") });
        let (t, v) = (parse(t)?, parse(v)?);
        if v < 0.0 {
            return Err(CycleError::NegativeSpeed { row });
        }
        if let Some(&prev) = timestamps.last() {
            if !uniform_step(prev, t) {
                return Err(CycleError::NonUniformTimestep { row });
            }
        }
        timestamps.push(t);
        speeds.push(to_mps(v));
    }
    let cycle = DriveCycle { name: name.to_string(), timestamps, ref_speeds: speeds };
    cycle.validate()?;
    Ok(cycle)
}

pub fn load_cycle(path: impl AsRef<Path>) -> Result<DriveCycle, CycleError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path)
        .map_err(|e| CycleError::Io { path: path.display().to_string(), message: e.to_string() })?;
    let name = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    parse_cycle(&name, &text)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DriverGains {
    /// per m/s of error
    pub kp: f64,
    /// per m of accumulated error
    pub ki: f64,
    /// per m/s^2
    pub kd: f64,
}

impl Default for DriverGains {
    fn default() -> Self {
        Self { kp: 0.3, ki: 0.005, kd: 0.0 }
    }
}

/// PID memory threaded through the simulation by the caller.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DriverState {
    pub integral_error: f64,
    pub last_error: f64,
    pub gains: DriverGains,
}

impl DriverState {
    pub fn new(gains: DriverGains) -> Self {
        Self { integral_error: 0.0, last_error: 0.0, gains }
    }
}

/// One PID update on `ref_speed - actual_speed`. The output is the pedal
/// position in [-1, 1]: positive is throttle, negative is brake. The
/// integrator is clamped so its contribution never exceeds full pedal, and
/// it stops accumulating while the pedal is saturated.
pub fn driver_step(ref_speed: f64, actual_speed: f64, state: &DriverState, dt: f64) -> (f64, DriverState) {
    let g = state.gains;
    let error = ref_speed - actual_speed;
    let derivative = (error - state.last_error) / dt;
    let output = |integral: f64| g.kp * error + g.ki * integral + g.kd * derivative;
    let mut integral = state.integral_error + error * dt;
    if g.ki > 0.0 {
        let cap = 1.0 / g.ki;
        integral = integral.clamp(-cap, cap);
    }
    // conditional integration: hold the integrator while the output is
    // saturated in the direction the error would push it further
    let tentative = output(integral);
    if tentative.abs() > 1.0 && tentative.signum() == error.signum() {
        integral = state.integral_error;
    }
    let raw = output(integral);
    let pedal = if raw.is_nan() { 0.0 } else { raw.clamp(-1.0, 1.0) };
    (pedal, DriverState { integral_error: integral, last_error: error, gains: g })
}

/// Scales pedal positions into torques.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PedalMap {
    /// Demand at full throttle, N*m in the transmission-input frame.
    pub reference_torque: f64,
    /// Motor torque at full brake (negative), N*m.
    pub brake_torque_min: f64,
    /// Throttle passes through unscaled in gears whose ratio is at most this.
    /// Lower (numerically larger) gears scale the throttle by
    /// `ratio / gear_ratio`, so a given pedal asks for roughly the same wheel
    /// force in every gear.
    pub throttle_reference_ratio: f64,
}

impl Default for PedalMap {
    fn default() -> Self {
        Self { reference_torque: 400.0, brake_torque_min: -400.0, throttle_reference_ratio: 1.0 }
    }
}

/// Applies the gear compensation of [`PedalMap::throttle_reference_ratio`]
/// to a throttle input; brake inputs pass through.
pub fn gear_compensated_pedal(pedal: f64, gear_ratio: f64, map: &PedalMap) -> f64 {
    if pedal > 0.0 && gear_ratio > map.throttle_reference_ratio {
        pedal * map.throttle_reference_ratio / gear_ratio
    } else {
        pedal
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct TorqueDemand {
    /// N*m, transmission-input frame, >= 0
    pub total_demand: f64,
    /// N*m, motor frame, <= 0
    pub brake_torque: f64,
}

impl TorqueDemand {
    pub fn is_braking(&self) -> bool {
        self.brake_torque < 0.0
    }
}

/// Throttle and brake are mutually exclusive: at most one is nonzero.
pub fn torque_demand(pedal: f64, map: &PedalMap) -> TorqueDemand {
    let pedal = pedal.clamp(-1.0, 1.0);
    if pedal >= 0.0 {
        TorqueDemand { total_demand: pedal * map.reference_torque, brake_torque: 0.0 }
    } else {
        TorqueDemand { total_demand: 0.0, brake_torque: -pedal * map.brake_torque_min }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    const HEADER: &str = "time_s,speed_mps\n";

    #[test]
    fn two_row_cycle() {
        let c = parse_cycle("x", &format!("{HEADER}0,0\n1,0\n")).unwrap();
        assert_eq!(c.len(), 2);
        assert!(c.ref_speeds.iter().all(|&v| v == 0.0));
        assert_eq!(c.dt(), 1.0);
    }

    #[test]
    fn mph_header_converts() {
        let c = parse_cycle("x", "time_s,speed_mph\n0,0\n1,10\n").unwrap();
        assert!((c.ref_speeds[1] - 4.4704).abs() < 1e-12);
    }

    #[test]
    fn gap_is_rejected_with_row() {
        let err = parse_cycle("x", &format!("{HEADER}0,0\n2,0\n")).unwrap_err();
        assert_eq!(err, CycleError::NonUniformTimestep { row: 2 });
        assert_eq!(err.to_string(), "non-uniform timestep at row 2");
        let err = parse_cycle("x", &format!("{HEADER}0,0\n1,0\n3,0\n")).unwrap_err();
        assert_eq!(err.to_string(), "non-uniform timestep at row 3");
        let err = parse_cycle("x", &format!("{HEADER}0,0\n0,0\n")).unwrap_err();
        assert_eq!(err.to_string(), "non-uniform timestep at row 2");
    }

    #[test]
    fn bad_inputs() {
        assert!(matches!(parse_cycle("x", "0,0\n1,0\n"), Err(CycleError::MissingHeader(_))));
        assert_eq!(parse_cycle("x", &format!("{HEADER}0,0\n1,-1\n")), Err(CycleError::NegativeSpeed { row: 2 }));
        assert!(matches!(parse_cycle("x", &format!("{HEADER}0,0\n1\n")), Err(CycleError::Malformed { row: 2, .. })));
        assert!(matches!(parse_cycle("x", &format!("{HEADER}0,0\n")), Err(CycleError::TooShort(1))));
    }

    #[test]
    fn pid_examples() {
        let s = DriverState::new(DriverGains::default());
        assert_eq!(driver_step(5.0, 5.0, &s, 1.0).0, 0.0);
        let p_only = DriverState::new(DriverGains { kp: 0.5, ki: 0.0, kd: 0.0 });
        assert_eq!(driver_step(10.0, 0.0, &p_only, 1.0).0, 1.0);
        assert_eq!(driver_step(0.0, 10.0, &p_only, 1.0).0, -1.0);
    }

    #[test]
    fn integrator_is_clamped() {
        let mut s = DriverState::new(DriverGains::default());
        for _ in 0..1000 {
            s = driver_step(30.0, 0.0, &s, 1.0).1;
        }
        assert!((s.gains.ki * s.integral_error).abs() <= 1.0 + 1e-12);
        // recovers as soon as the error flips
        let (pedal, _) = driver_step(0.0, 3.0, &s, 1.0);
        assert!(pedal < 0.0 + 1.0 && pedal > -1.0);
    }

    #[test]
    fn saturated_output_holds_the_integrator() {
        let s = DriverState { integral_error: 4.0, last_error: 0.0, gains: DriverGains { kp: 0.3, ki: 0.005, kd: 0.0 } };
        let (pedal, next) = driver_step(10.0, 0.0, &s, 1.0);
        assert_eq!(pedal, 1.0);
        assert_eq!(next.integral_error, 4.0);
        // unsaturated: integrates normally
        let (_, next) = driver_step(1.0, 0.0, &s, 1.0);
        assert_eq!(next.integral_error, 5.0);
    }

    #[test]
    fn gear_compensation_scales_throttle_only() {
        let m = PedalMap::default();
        assert!((gear_compensated_pedal(0.5, 2.847, &m) - 0.5 / 2.847).abs() < 1e-15);
        assert_eq!(gear_compensated_pedal(0.5, 1.0, &m), 0.5);
        assert_eq!(gear_compensated_pedal(0.5, 0.7, &m), 0.5);
        assert_eq!(gear_compensated_pedal(-0.5, 2.847, &m), -0.5);
    }

    #[test]
    fn demand_examples() {
        let m = PedalMap::default();
        assert_eq!(torque_demand(0.0, &m), TorqueDemand::default());
        assert_eq!(torque_demand(1.0, &m).total_demand, 400.0);
        let d = torque_demand(-0.5, &PedalMap { reference_torque: 400.0, brake_torque_min: -100.0, ..PedalMap::default() });
        assert_eq!(d.brake_torque, -50.0);
        assert_eq!(d.total_demand, 0.0);
    }

    proptest! {
        #[test]
        fn pedal_always_bounded(r in 0.0..40.0f64, a in 0.0..40.0f64, i in -100.0..100.0f64, kp in 0.0..5.0f64, kd in 0.0..2.0f64) {
            let s = DriverState { integral_error: i, last_error: 0.0, gains: DriverGains { kp, ki: 0.1, kd } };
            let (pedal, _) = driver_step(r, a, &s, 1.0);
            prop_assert!((-1.0..=1.0).contains(&pedal));
        }

        #[test]
        fn pedals_are_mutually_exclusive(pedal in -1.0..=1.0f64) {
            let d = torque_demand(pedal, &PedalMap::default());
            prop_assert!(d.total_demand >= 0.0 && d.brake_torque <= 0.0);
            prop_assert!(d.total_demand == 0.0 || d.brake_torque == 0.0);
        }
    }
}
