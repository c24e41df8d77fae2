//! Forward-looking parallel-hybrid plant.
//!
//! The engine drives the front axle through a four-speed transmission and
//! the final drive; the motor drives the rear axle through a fixed reduction.
//! All state is explicit: `plant_step` maps a `PlantState` plus actuator
//! commands to the next state.

mod battery;
mod maps;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use battery::{battery_step, BatteryParams, BatteryStep};
pub use maps::{EngineMap, EngineMapSpec, Lookup, MotorMap, MotorMapSpec, Table2d};

use crate::units::rpm_to_rad_s;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PowertrainError {
    #[error("invalid vehicle parameters: {0}")]
    InvalidParams(String),
    #[error("invalid map: {0}")]
    InvalidMap(String),
}

/// Physical constants of the vehicle. Serializable; `Vehicle::new` builds
/// the interpolation tables from the map specs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VehicleParams {
    /// kg
    pub mass: f64,
    /// N*m
    pub engine_max_torque: f64,
    /// W
    pub engine_max_power: f64,
    /// rad/s
    pub engine_max_speed: f64,
    /// Below this vehicle speed (m/s) the engine is declutched and off.
    pub engine_cutoff_speed: f64,
    pub em_max_torque: f64,
    pub em_min_torque: f64,
    /// W, mechanical
    pub em_max_power: f64,
    pub gear_ratios: [f64; 4],
    pub final_drive_ratio: f64,
    /// Vehicle speeds (m/s) at which to upshift out of gears 1, 2, 3.
    pub shift_up_speeds: [f64; 3],
    /// Downshift happens this far (m/s) below the upshift speed.
    pub shift_hysteresis: f64,
    /// m
    pub wheel_radius: f64,
    pub drag_coefficient: f64,
    /// m^2
    pub frontal_area: f64,
    /// kg/m^3
    pub air_density: f64,
    pub rolling_coefficient: f64,
    pub gravity: f64,
    pub trans_efficiency: f64,
    pub em_mech_efficiency: f64,
    pub em_gear_ratio: f64,
    /// J/kg
    pub fuel_lhv: f64,
    pub battery: BatteryParams,
    pub engine_map: EngineMapSpec,
    pub em_map: MotorMapSpec,
}

impl Default for VehicleParams {
    fn default() -> Self {
        Self {
            mass: 1636.0,
            engine_max_torque: 115.0,
            engine_max_power: 64_600.0,
            engine_max_speed: rpm_to_rad_s(6000.0),
            engine_cutoff_speed: 0.0,
            em_max_torque: 400.0,
            em_min_torque: -400.0,
            em_max_power: 143_000.0,
            gear_ratios: [2.847, 1.552, 1.000, 0.700],
            final_drive_ratio: 4.13,
            shift_up_speeds: [5.0, 11.0, 20.0],
            shift_hysteresis: 1.0,
            wheel_radius: 0.30,
            drag_coefficient: 0.30,
            frontal_area: 2.2,
            air_density: 1.2,
            rolling_coefficient: 0.01,
            gravity: 9.81,
            trans_efficiency: 0.97,
            em_mech_efficiency: 0.97,
            em_gear_ratio: 4.13,
            fuel_lhv: 43.0e6,
            battery: BatteryParams::default(),
            engine_map: EngineMapSpec::default(),
            em_map: MotorMapSpec::default(),
        }
    }
}

impl VehicleParams {
    pub fn validate(&self) -> Result<(), PowertrainError> {
        let bad = |m: String| Err(PowertrainError::InvalidParams(m));
        let positive = [
            ("mass", self.mass),
            ("engine_max_torque", self.engine_max_torque),
            ("engine_max_power", self.engine_max_power),
            ("engine_max_speed", self.engine_max_speed),
            ("em_max_torque", self.em_max_torque),
            ("em_max_power", self.em_max_power),
            ("final_drive_ratio", self.final_drive_ratio),
            ("wheel_radius", self.wheel_radius),
            ("em_gear_ratio", self.em_gear_ratio),
            ("fuel_lhv", self.fuel_lhv),
            ("gravity", self.gravity),
            ("shift_hysteresis", self.shift_hysteresis),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return bad(format!("{name} must be positive, got {v}"));
            }
        }
        for (name, v) in [
            ("drag_coefficient", self.drag_coefficient),
            ("frontal_area", self.frontal_area),
            ("air_density", self.air_density),
            ("rolling_coefficient", self.rolling_coefficient),
            ("engine_cutoff_speed", self.engine_cutoff_speed),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                return bad(format!("{name} must be non-negative, got {v}"));
            }
        }
        for (name, v) in [("trans_efficiency", self.trans_efficiency), ("em_mech_efficiency", self.em_mech_efficiency)] {
            if !(v > 0.0 && v <= 1.0) {
                return bad(format!("{name} must lie in (0, 1], got {v}"));
            }
        }
        if !(self.em_min_torque < 0.0 && 0.0 < self.em_max_torque) {
            return bad("need em_min_torque < 0 < em_max_torque".into());
        }
        if self.gear_ratios.iter().any(|&r| !(r > 0.0)) || self.gear_ratios.windows(2).any(|w| w[1] >= w[0]) {
            return bad("gear ratios must be positive and strictly decreasing".into());
        }
        if self.shift_up_speeds.windows(2).any(|w| w[1] <= w[0]) || self.shift_up_speeds[0] <= self.shift_hysteresis {
            return bad("shift speeds must increase and exceed the hysteresis band".into());
        }
        self.battery.validate()
    }

    pub fn gear_ratio(&self, gear: u8) -> f64 {
        self.gear_ratios[usize::from(gear.clamp(1, 4)) - 1]
    }

    /// Engine-shaft torque that produces the same wheel force as `em_torque`
    /// on the rear axle. Converts motor torques into the transmission-input
    /// frame in which the driver's demand is expressed.
    pub fn em_to_input_frame(&self, gear: u8) -> f64 {
        (self.em_gear_ratio * self.em_mech_efficiency)
            / (self.final_drive_ratio * self.gear_ratio(gear) * self.trans_efficiency)
    }
}

/// Parameters plus the tables built from them.
#[derive(Debug, Clone, PartialEq)]
pub struct Vehicle {
    pub params: VehicleParams,
    pub engine: EngineMap,
    pub motor: MotorMap,
}

impl Vehicle {
    pub fn new(params: VehicleParams) -> Result<Self, PowertrainError> {
        params.validate()?;
        let engine = EngineMap::synthetic(
            &params.engine_map,
            params.engine_max_torque,
            params.engine_max_power,
            params.engine_max_speed,
            params.fuel_lhv,
        )?;
        let motor = MotorMap::synthetic(&params.em_map, params.em_max_torque.max(-params.em_min_torque))?;
        Ok(Self { params, engine, motor })
    }
}

impl Default for Vehicle {
    fn default() -> Self {
        Self::new(VehicleParams::default()).expect("default vehicle parameters are valid")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PlantState {
    /// m/s
    pub speed: f64,
    pub soc: f64,
    /// 1..=4
    pub gear: u8,
    /// s
    pub time: f64,
}

/// Commands for one step. `brake_torque` is the driver's regenerative brake
/// request in the motor frame (non-positive); it adds to `em_torque` and
/// whatever the motor cannot absorb goes to the friction brakes.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct ActuatorCommand {
    pub engine_torque: f64,
    pub em_torque: f64,
    pub brake_torque: f64,
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct RoadForces {
    pub air: f64,
    pub roll: f64,
    pub grade: f64,
    pub traction: f64,
}

/// Which limits were hit while realizing a command.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct ClampFlags {
    pub engine_torque: bool,
    pub em_torque: bool,
    pub battery_power: bool,
    pub soc: bool,
    pub fuel_map: bool,
}

impl ClampFlags {
    /// True when an actuator or storage limit changed the command.
    pub fn any_actuator(&self) -> bool {
        self.engine_torque || self.em_torque || self.battery_power || self.soc
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepOutcome {
    pub next_state: PlantState,
    /// kg/s
    pub fuel_rate_engine: f64,
    /// W, positive = discharge
    pub battery_power: f64,
    pub battery_current: f64,
    pub actual_engine_torque: f64,
    pub actual_em_torque: f64,
    pub engine_speed: f64,
    pub em_speed: f64,
    pub road_forces: RoadForces,
    /// N, non-positive
    pub friction_brake_force: f64,
    pub clamps: ClampFlags,
}

/// Aerodynamic drag, rolling resistance and grade force, all in N.
pub fn road_loads(speed: f64, grade: f64, params: &VehicleParams) -> (f64, f64, f64) {
    let air = 0.5 * params.air_density * params.drag_coefficient * params.frontal_area * speed * speed;
    let weight = params.mass * params.gravity;
    (air, grade.cos() * params.rolling_coefficient * weight, grade.sin() * weight)
}

/// Speed-threshold shift schedule with a hysteresis band below each upshift
/// point.
pub fn select_gear(speed: f64, current: u8, params: &VehicleParams) -> u8 {
    let mut gear = current.clamp(1, 4);
    while gear < 4 && speed >= params.shift_up_speeds[usize::from(gear) - 1] {
        gear += 1;
    }
    while gear > 1 && speed < params.shift_up_speeds[usize::from(gear) - 2] - params.shift_hysteresis {
        gear -= 1;
    }
    gear
}

/// Transmission-input (engine) speed in rad/s.
pub fn engine_speed(speed: f64, gear: u8, params: &VehicleParams) -> f64 {
    speed / params.wheel_radius * params.final_drive_ratio * params.gear_ratio(gear)
}

/// Motor shaft speed in rad/s.
pub fn em_speed(speed: f64, params: &VehicleParams) -> f64 {
    speed / params.wheel_radius * params.em_gear_ratio
}

/// Engine fuel rate (kg/s) interpolated from the map. Queries outside the
/// map are clamped onto it and flagged.
pub fn engine_fuel_rate(engine_speed: f64, engine_torque: f64, map: &EngineMap) -> Lookup {
    map.fuel_rate(engine_speed, engine_torque)
}

/// Battery-side electrical power (W) for a motor operating point.
pub fn em_electrical_power(em_speed: f64, em_torque: f64, map: &MotorMap) -> f64 {
    let mech = em_speed * em_torque;
    if mech == 0.0 {
        return 0.0;
    }
    let eta = map.efficiency(em_speed, em_torque).value;
    if mech > 0.0 {
        mech / eta
    } else {
        mech * eta
    }
}

/// Wheel force from engine torque through transmission and final drive.
pub fn engine_wheel_force(torque: f64, gear: u8, params: &VehicleParams) -> f64 {
    torque * params.final_drive_ratio * params.gear_ratio(gear) * params.trans_efficiency / params.wheel_radius
}

/// Wheel force from motor torque through the rear reduction.
pub fn em_wheel_force(torque: f64, params: &VehicleParams) -> f64 {
    torque * params.em_gear_ratio * params.em_mech_efficiency / params.wheel_radius
}

/// Engine torque actually available this step: zero when declutched below
/// the cutoff speed, otherwise the full-load curve.
pub fn engine_torque_limit(speed: f64, gear: u8, vehicle: &Vehicle) -> f64 {
    if speed < vehicle.params.engine_cutoff_speed {
        return 0.0;
    }
    vehicle.engine.max_torque_at(engine_speed(speed, gear, &vehicle.params))
}

/// Motor torque range at shaft speed `w` from the torque and power ratings.
pub fn em_torque_limits(w: f64, params: &VehicleParams) -> (f64, f64) {
    let (mut lo, mut hi) = (params.em_min_torque, params.em_max_torque);
    if w > 0.0 {
        let cap = params.em_max_power / w;
        lo = lo.max(-cap);
        hi = hi.min(cap);
    }
    (lo, hi)
}

/// Terminal-power window the pack allows for the next `dt` seconds at
/// `soc`: rated power limits, the physical deliverable limit, then the SOC
/// window. Returned as (most negative, most positive).
pub fn battery_power_window(soc: f64, dt: f64, battery: &BatteryParams) -> (f64, f64) {
    let mut hi = battery.max_discharge_power.min(battery.deliverable_power());
    let mut lo = -battery.max_charge_power;
    hi = hi.min(battery.power_to_reach_soc(soc, battery.soc_min, dt).max(0.0));
    lo = lo.max(battery.power_to_reach_soc(soc, battery.soc_max, dt).min(0.0));
    (lo, hi)
}

/// Reduces `torque` toward zero until its electrical power fits within
/// `[lo, hi]`. Electrical power is monotone in torque along the ray, so a
/// bisection on the scale factor suffices.
fn fit_torque_to_power(w: f64, torque: f64, lo: f64, hi: f64, map: &MotorMap) -> f64 {
    let within = |t: f64| {
        let p = em_electrical_power(w, t, map);
        p <= hi && p >= lo
    };
    if within(torque) {
        return torque;
    }
    let (mut ok, mut bad) = (0.0, 1.0);
    for _ in 0..60 {
        let mid = 0.5 * (ok + bad);
        if within(torque * mid) {
            ok = mid;
        } else {
            bad = mid;
        }
    }
    torque * ok
}

/// Advances the plant by `dt` seconds with forward Euler.
///
/// Commands are clamped in order: actuator torque limits, battery power
/// limits, SOC window. A shortfall on one actuator is not reassigned to the
/// other. Regenerative braking the motor cannot absorb is applied by the
/// friction brakes.
pub fn plant_step(state: &PlantState, cmd: &ActuatorCommand, grade: f64, dt: f64, vehicle: &Vehicle) -> StepOutcome {
    let p = &vehicle.params;
    let v = state.speed.max(0.0);
    let gear = state.gear.clamp(1, 4);
    let mut clamps = ClampFlags::default();

    let w_ice = engine_speed(v, gear, p);
    let t_ice_max = engine_torque_limit(v, gear, vehicle);
    let t_ice = cmd.engine_torque.clamp(0.0, t_ice_max);
    clamps.engine_torque = t_ice != cmd.engine_torque;
    let fuel = engine_fuel_rate(w_ice, t_ice, &vehicle.engine);
    clamps.fuel_map = fuel.clamped;

    let w_em = em_speed(v, p);
    let t_em_cmd = cmd.em_torque + cmd.brake_torque;
    let (t_lo, t_hi) = em_torque_limits(w_em, p);
    let mut t_em = t_em_cmd.clamp(t_lo, t_hi);
    clamps.em_torque = t_em != t_em_cmd;

    let (rated_lo, rated_hi) = (-p.battery.max_charge_power, p.battery.max_discharge_power.min(p.battery.deliverable_power()));
    let limited = fit_torque_to_power(w_em, t_em, rated_lo, rated_hi, &vehicle.motor);
    clamps.battery_power = limited != t_em;
    t_em = limited;
    let (soc_lo, soc_hi) = battery_power_window(state.soc, dt, &p.battery);
    let limited = fit_torque_to_power(w_em, t_em, soc_lo, soc_hi, &vehicle.motor);
    clamps.soc = limited != t_em;
    t_em = limited;

    let power = em_electrical_power(w_em, t_em, &vehicle.motor);
    let cell = battery_step(power, state.soc, dt, &p.battery);
    clamps.battery_power |= cell.power_limited;
    clamps.soc |= cell.soc_clamped;

    let f_ice = engine_wheel_force(t_ice, gear, p);
    let f_em = em_wheel_force(t_em, p);
    let friction = if cmd.brake_torque < 0.0 { em_wheel_force((t_em_cmd - t_em).min(0.0), p) } else { 0.0 };
    let (air, roll, grade_force) = road_loads(v, grade, p);
    let traction = f_ice + f_em;
    let accel = (traction + friction - air - roll - grade_force) / p.mass;
    let next_speed = (v + accel * dt).max(0.0);

    StepOutcome {
        next_state: PlantState {
            speed: next_speed,
            soc: cell.soc,
            gear: select_gear(next_speed, gear, p),
            time: state.time + dt,
        },
        fuel_rate_engine: fuel.value,
        battery_power: cell.power,
        battery_current: cell.current,
        actual_engine_torque: t_ice,
        actual_em_torque: t_em,
        engine_speed: w_ice,
        em_speed: w_em,
        road_forces: RoadForces { air, roll, grade: grade_force, traction },
        friction_brake_force: friction,
        clamps,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::units::{mph_to_mps, rad_s_to_rpm};

    fn rel(a: f64, b: f64) -> f64 {
        if b == 0.0 {
            a.abs()
        } else {
            ((a - b) / b).abs()
        }
    }

    fn rest(soc: f64) -> PlantState {
        PlantState { speed: 0.0, soc, gear: 1, time: 0.0 }
    }

    #[test]
    fn road_loads_match_hand_values() {
        let p = VehicleParams::default();
        let (air, _, grade) = road_loads(0.0, 0.0, &p);
        assert_eq!(air, 0.0);
        assert_eq!(grade, 0.0);
        let (air, _, _) = road_loads(20.0, 0.0, &p);
        assert!(rel(air, 158.4) < 1e-9, "{air}");
        let (_, roll, _) = road_loads(10.0, 0.0, &p);
        assert!(rel(roll, 160.4916) < 1e-9, "{roll}");
    }

    #[test]
    fn engine_speed_matches_hand_values() {
        let p = VehicleParams::default();
        assert_eq!(engine_speed(0.0, 1, &p), 0.0);
        let w4 = engine_speed(10.0, 4, &p);
        assert!(rel(w4, 10.0 / 0.3 * 4.13 * 0.7) < 1e-12);
        assert!((w4 - 96.37).abs() < 0.01);
        assert!((rad_s_to_rpm(w4) - 920.0).abs() < 1.0);
        let w1 = engine_speed(10.0, 1, &p);
        assert!((w1 - 391.9).abs() < 0.05);
        assert!((rad_s_to_rpm(w1) - 3742.0).abs() < 1.0);
    }

    #[test]
    fn gear_schedule() {
        let p = VehicleParams::default();
        assert_eq!(select_gear(0.0, 3, &p), 1);
        let v65 = mph_to_mps(65.0);
        let g = select_gear(v65, 1, &p);
        assert_eq!(g, 4);
        assert!(rad_s_to_rpm(engine_speed(v65, g, &p)) <= 6000.0);
        // engine speed stays on the map for every speed up to 65 mph
        let mut gear = 1;
        let mut v = 0.0;
        while v <= v65 {
            gear = select_gear(v, gear, &p);
            assert!(engine_speed(v, gear, &p) <= p.engine_max_speed);
            v += 0.05;
        }
    }

    #[test]
    fn hysteresis_prevents_hunting() {
        let p = VehicleParams::default();
        // sit just inside the band below each upshift point
        for &threshold in &p.shift_up_speeds {
            let mut gear = select_gear(threshold, 1, &p);
            let mut shifts = 0;
            for k in 0..100 {
                let v = threshold - 0.5 + 0.4 * ((k % 2) as f64);
                let next = select_gear(v, gear, &p);
                shifts += usize::from(next != gear);
                gear = next;
            }
            assert_eq!(shifts, 0);
        }
    }

    #[test]
    fn constant_speed_cruise_never_shifts() {
        let v = Vehicle::default();
        let mut state = PlantState { speed: 13.0, soc: 0.6, gear: select_gear(13.0, 1, &v.params), time: 0.0 };
        let (air, roll, _) = road_loads(13.0, 0.0, &v.params);
        let mut shifts = 0;
        for _ in 0..100 {
            // hold speed with the engine against road load
            let f = air + roll + v.params.mass * (13.0 - state.speed);
            let t = f * v.params.wheel_radius
                / (v.params.final_drive_ratio * v.params.gear_ratio(state.gear) * v.params.trans_efficiency);
            let out = plant_step(&state, &ActuatorCommand { engine_torque: t, ..Default::default() }, 0.0, 1.0, &v);
            shifts += usize::from(out.next_state.gear != state.gear);
            state = out.next_state;
        }
        assert_eq!(shifts, 0);
        assert!((state.speed - 13.0).abs() < 1e-6);
    }

    #[test]
    fn em_power_sign_convention() {
        let v = Vehicle::default();
        assert_eq!(em_electrical_power(100.0, 0.0, &v.motor), 0.0);
        let eta = v.motor.efficiency(100.0, 50.0).value;
        assert!(rel(em_electrical_power(100.0, 50.0, &v.motor), 5000.0 / eta) < 1e-12);
        assert!(rel(em_electrical_power(100.0, -50.0, &v.motor), -5000.0 * eta) < 1e-12);
    }

    #[test]
    fn rest_is_an_equilibrium() {
        let v = Vehicle::default();
        let out = plant_step(&rest(0.6), &ActuatorCommand::default(), 0.0, 1.0, &v);
        assert_eq!(out.next_state.speed, 0.0);
        assert_eq!(out.next_state.soc, 0.6);
        assert_eq!(out.fuel_rate_engine, 0.0);
        assert_eq!(out.battery_power, 0.0);
    }

    #[test]
    fn wheel_forces_match_hand_values() {
        let p = VehicleParams::default();
        let wheel_torque: f64 = 100.0 * 4.13 * 2.847 * 0.97;
        assert!((wheel_torque - 1140.7).abs() < 0.2);
        assert!(rel(engine_wheel_force(100.0, 1, &p), wheel_torque / 0.3) < 1e-12);
        assert!((engine_wheel_force(100.0, 1, &p) - 3802.0).abs() < 0.5);
        assert!(rel(em_wheel_force(100.0, &p), 100.0 * 4.13 * 0.97 / 0.3) < 1e-12);
        assert!((em_wheel_force(100.0, &p) - 1335.4).abs() < 0.05);
    }

    #[test]
    fn engine_is_off_below_cutoff() {
        let mut v = Vehicle::default();
        v.params.engine_cutoff_speed = 1.0;
        let state = PlantState { speed: 0.5, soc: 0.6, gear: 1, time: 0.0 };
        let out = plant_step(&state, &ActuatorCommand { engine_torque: 80.0, ..Default::default() }, 0.0, 1.0, &v);
        assert_eq!(out.actual_engine_torque, 0.0);
        assert_eq!(out.fuel_rate_engine, 0.0);
        assert!(out.clamps.engine_torque);
    }

    #[test]
    fn discharge_lowers_soc_and_charge_raises_it() {
        let v = Vehicle::default();
        let state = PlantState { speed: 10.0, soc: 0.6, gear: 3, time: 0.0 };
        let out = plant_step(&state, &ActuatorCommand { em_torque: 80.0, ..Default::default() }, 0.0, 1.0, &v);
        assert!(out.battery_power > 0.0 && out.next_state.soc < 0.6);
        let out = plant_step(&state, &ActuatorCommand { em_torque: -80.0, ..Default::default() }, 0.0, 1.0, &v);
        assert!(out.battery_power < 0.0 && out.next_state.soc > 0.6);
    }

    #[test]
    fn soc_floor_blocks_discharge() {
        let v = Vehicle::default();
        let state = PlantState { speed: 10.0, soc: 0.4, gear: 3, time: 0.0 };
        let out = plant_step(&state, &ActuatorCommand { em_torque: 80.0, ..Default::default() }, 0.0, 1.0, &v);
        assert!(out.clamps.soc);
        assert!(out.battery_power.abs() < 1e-6);
        assert!(out.next_state.soc >= 0.4);
    }

    #[test]
    fn unabsorbed_regen_goes_to_friction_brakes() {
        let v = Vehicle::default();
        let state = PlantState { speed: 20.0, soc: 0.8, gear: 4, time: 0.0 };
        let cmd = ActuatorCommand { brake_torque: -200.0, ..Default::default() };
        let out = plant_step(&state, &cmd, 0.0, 1.0, &v);
        // full pack: motor cannot charge, friction takes the whole request
        assert!(out.actual_em_torque.abs() < 1e-6);
        assert!(rel(out.friction_brake_force, em_wheel_force(-200.0, &v.params)) < 1e-6);
        assert!(out.next_state.speed < 20.0);
    }

    #[test]
    fn euler_step_is_first_order() {
        let v = Vehicle::default();
        let run = |dt: f64, steps: usize| {
            let mut s = PlantState { speed: 10.0, soc: 0.6, gear: 3, time: 0.0 };
            for _ in 0..steps {
                s = plant_step(&s, &ActuatorCommand { engine_torque: 60.0, ..Default::default() }, 0.0, dt, &v).next_state;
            }
            s.speed
        };
        // reference: very fine step over the same 10 s horizon
        let fine = run(1e-4, 100_000);
        let e1 = (run(1.0, 10) - fine).abs();
        let e2 = (run(0.5, 20) - fine).abs();
        let ratio = e1 / e2;
        assert!((1.6..2.5).contains(&ratio), "error ratio {ratio}");
    }

    #[test]
    fn default_params_validate() {
        let p = VehicleParams::default();
        p.validate().unwrap();
        let mut bad = p.clone();
        bad.gear_ratios = [2.0, 2.5, 1.0, 0.7];
        assert!(bad.validate().is_err());
        let mut bad = p.clone();
        bad.em_min_torque = 10.0;
        assert!(bad.validate().is_err());
        let mut bad = p;
        bad.trans_efficiency = 1.2;
        assert!(bad.validate().is_err());
    }
}
