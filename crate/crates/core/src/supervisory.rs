//! Quantities shared by every supervisory strategy (equivalent fuel of
//! battery use, per-step reward, torque split) and the ECMS controller.

use serde::{Deserialize, Serialize};

use crate::powertrain::{
    battery_power_window, em_electrical_power, em_speed, em_torque_limits, engine_fuel_rate, engine_speed,
    engine_torque_limit, Vehicle,
};

/// Fixed equivalence factors converting battery power into fuel rate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EquivalenceParams {
    pub s_discharge: f64,
    pub s_charge: f64,
    pub eta_discharge: f64,
    pub eta_charge: f64,
    /// J/kg
    pub fuel_lhv: f64,
}

impl Default for EquivalenceParams {
    fn default() -> Self {
        Self { s_discharge: 3.0, s_charge: 3.0, eta_discharge: 0.95, eta_charge: 0.95, fuel_lhv: 43.0e6 }
    }
}

impl EquivalenceParams {
    pub fn validate(&self) -> Result<(), String> {
        if !(self.s_discharge > 0.0 && self.s_charge > 0.0 && self.fuel_lhv > 0.0) {
            return Err("equivalence factors and fuel LHV must be positive".into());
        }
        for eta in [self.eta_discharge, self.eta_charge] {
            if !(eta > 0.0 && eta <= 1.0) {
                return Err(format!("equivalence efficiency {eta} outside (0, 1]"));
            }
        }
        Ok(())
    }
}

/// Fuel rate (kg/s) equivalent to drawing `battery_power` W from the pack.
/// Charging yields a negative (credited) rate.
pub fn equivalent_fuel_rate(battery_power: f64, params: &EquivalenceParams) -> f64 {
    if battery_power > 0.0 {
        params.s_discharge / params.eta_discharge * battery_power / params.fuel_lhv
    } else if battery_power < 0.0 {
        params.s_charge * params.eta_charge * battery_power / params.fuel_lhv
    } else {
        0.0
    }
}

/// Per-step reward: one minus the equivalent fuel mass burned in the step.
pub fn reward(engine_fuel_rate: f64, battery_power: f64, dt: f64, params: &EquivalenceParams) -> f64 {
    -(engine_fuel_rate + equivalent_fuel_rate(battery_power, params)) * dt + 1.0
}

/// Engine/motor torque split for one step.
///
/// `engine_torque` is in the transmission-input frame, `em_torque` at the
/// motor shaft; `engine_torque + em_torque * share` equals the demand, with
/// `share` from [`crate::powertrain::VehicleParams::em_to_input_frame`].
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct ControlDecision {
    pub em_torque: f64,
    pub engine_torque: f64,
}

/// Splits `total_demand` given a requested motor torque. A positive motor
/// request is capped at the whole demand (the engine cannot absorb the
/// excess); a negative request loads the engine to charge the battery.
pub fn split_demand(em_request: f64, total_demand: f64, gear: u8, vehicle: &Vehicle) -> ControlDecision {
    let share = vehicle.params.em_to_input_frame(gear);
    let em = if em_request > 0.0 { em_request.min(total_demand.max(0.0) / share) } else { em_request };
    ControlDecision { em_torque: em, engine_torque: total_demand - em * share }
}

/// Operating point handed to the ECMS controller.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EcmsQuery {
    /// m/s
    pub speed: f64,
    pub gear: u8,
    pub soc: f64,
    /// N*m, transmission-input frame
    pub total_demand: f64,
    /// s
    pub dt: f64,
}

/// Cost and feasibility of one candidate motor torque.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CandidateEval {
    pub decision: ControlDecision,
    /// kg/s
    pub engine_fuel_rate: f64,
    /// W
    pub battery_power: f64,
    /// Engine fuel plus equivalent battery fuel, kg/s.
    pub cost: f64,
    /// Normalized limit excess; zero when feasible.
    pub violation: f64,
}

impl CandidateEval {
    pub fn feasible(&self) -> bool {
        self.violation == 0.0
    }
}

/// Evaluates the candidate `em_request` at `query` against actuator,
/// battery-power and SOC limits, using the same models as the plant.
pub fn evaluate_candidate(query: &EcmsQuery, em_request: f64, vehicle: &Vehicle, eq: &EquivalenceParams) -> CandidateEval {
    let p = &vehicle.params;
    let decision = split_demand(em_request, query.total_demand, query.gear, vehicle);
    let w_ice = engine_speed(query.speed, query.gear, p);
    let t_ice_max = engine_torque_limit(query.speed, query.gear, vehicle);
    let mut violation = (decision.engine_torque - t_ice_max).max(0.0) / p.engine_max_torque;
    violation += (-decision.engine_torque).max(0.0) / p.engine_max_torque;

    let w_em = em_speed(query.speed, p);
    let (t_lo, t_hi) = em_torque_limits(w_em, p);
    violation += ((decision.em_torque - t_hi).max(0.0) + (t_lo - decision.em_torque).max(0.0)) / p.em_max_torque;

    let power = em_electrical_power(w_em, decision.em_torque, &vehicle.motor);
    let (lo, hi) = battery_power_window(query.soc, query.dt, &p.battery);
    violation += ((power - hi).max(0.0) + (lo - power).max(0.0)) / p.battery.max_discharge_power;

    let fuel = engine_fuel_rate(w_ice, decision.engine_torque.clamp(0.0, t_ice_max), &vehicle.engine).value;
    CandidateEval {
        decision,
        engine_fuel_rate: fuel,
        battery_power: power,
        cost: fuel + equivalent_fuel_rate(power, eq),
        violation,
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EcmsDecision {
    /// Index into the candidate set.
    pub action_index: usize,
    pub decision: ControlDecision,
    pub cost: f64,
    /// False when no candidate was feasible and the least-violating one was
    /// returned.
    pub feasible: bool,
}

/// Instantaneous equivalent-fuel minimization over a finite candidate set
/// of motor torques. Ties go to the smallest |T_EM|, then the lower index.
///
/// Panics if `actions` is empty.
pub fn ecms_action(query: &EcmsQuery, actions: &[f64], vehicle: &Vehicle, eq: &EquivalenceParams) -> EcmsDecision {
    assert!(!actions.is_empty(), "ECMS needs at least one candidate");
    let evals: Vec<CandidateEval> = actions.iter().map(|&a| evaluate_candidate(query, a, vehicle, eq)).collect();
    let any_feasible = evals.iter().any(CandidateEval::feasible);
    let score = |e: &CandidateEval| if any_feasible { e.cost } else { e.violation };
    let mut best: Option<usize> = None;
    for (k, e) in evals.iter().enumerate() {
        if any_feasible && !e.feasible() {
            continue;
        }
        best = match best {
            None => Some(k),
            Some(b) => {
                let (sb, sk) = (score(&evals[b]), score(e));
                if sk < sb || (sk == sb && actions[k].abs() < actions[b].abs()) {
                    Some(k)
                } else {
                    Some(b)
                }
            }
        };
    }
    let k = best.expect("non-empty candidate set");
    EcmsDecision { action_index: k, decision: evals[k].decision, cost: evals[k].cost, feasible: any_feasible }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rel(a: f64, b: f64) -> f64 {
        ((a - b) / b).abs()
    }

    #[test]
    fn equivalent_fuel_examples() {
        let eq = EquivalenceParams::default();
        assert_eq!(equivalent_fuel_rate(0.0, &eq), 0.0);
        // 3 / 0.95 * 1e4 / 43e6
        let dis = 3.0 / 0.95 * 10_000.0 / 43.0e6;
        assert!(rel(equivalent_fuel_rate(10_000.0, &eq), dis) < 1e-12);
        assert!((equivalent_fuel_rate(10_000.0, &eq) - 7.34e-4).abs() < 5e-7);
        let chg = -3.0 * 0.95 * 10_000.0 / 43.0e6;
        assert!(rel(equivalent_fuel_rate(-10_000.0, &eq), chg) < 1e-12);
        assert!((equivalent_fuel_rate(-10_000.0, &eq) + 6.63e-4).abs() < 5e-7);
    }

    #[test]
    fn equivalent_fuel_has_a_kink_at_zero() {
        let eq = EquivalenceParams::default();
        let h = 1.0;
        let right = equivalent_fuel_rate(h, &eq) / h;
        let left = equivalent_fuel_rate(-h, &eq) / -h;
        assert!(right > left);
        assert!(rel(right / left, 1.0 / (0.95 * 0.95)) < 1e-12);
    }

    #[test]
    fn reward_examples() {
        let eq = EquivalenceParams::default();
        assert_eq!(reward(0.0, 0.0, 1.0, &eq), 1.0);
        assert!(rel(reward(0.001, 0.0, 1.0, &eq), 0.999) < 1e-12);
        let r = reward(0.0005, -10_000.0, 1.0, &eq);
        let expected = 1.0 - (0.0005 - 3.0 * 0.95 * 10_000.0 / 43.0e6);
        assert!(rel(r, expected) < 1e-12);
        assert!((r - 1.000163).abs() < 5e-7);
    }

    #[test]
    fn reward_slope_is_minus_dt() {
        let eq = EquivalenceParams::default();
        for dt in [0.5, 1.0, 2.0] {
            let a = reward(0.001, 0.0, dt, &eq);
            let b = reward(0.002, 0.0, dt, &eq);
            assert!(rel((b - a) / 0.001, -dt) < 1e-9);
        }
    }

    #[test]
    fn split_conserves_demand() {
        let v = Vehicle::default();
        for gear in 1..=4 {
            let share = v.params.em_to_input_frame(gear);
            for (req, demand) in [(50.0, 100.0), (250.0, 30.0), (-100.0, 60.0), (0.0, 0.0)] {
                let d = split_demand(req, demand, gear, &v);
                assert!((d.engine_torque + d.em_torque * share - demand).abs() < 1e-9);
                assert!(d.engine_torque >= -1e-12);
            }
        }
    }

    #[test]
    fn zero_demand_at_rest_costs_nothing() {
        let v = Vehicle::default();
        let eq = EquivalenceParams::default();
        let actions: Vec<f64> = (0..20).map(|k| -100.0 + k as f64 * 350.0 / 19.0).collect();
        let q = EcmsQuery { speed: 0.0, gear: 1, soc: 0.6, total_demand: 0.0, dt: 1.0 };
        let d = ecms_action(&q, &actions, &v, &eq);
        assert!(d.feasible);
        assert_eq!(d.decision.em_torque, 0.0);
        assert_eq!(d.decision.engine_torque, 0.0);
        assert_eq!(d.cost, 0.0);
    }

    #[test]
    fn infeasible_everywhere_returns_least_violating() {
        let v = Vehicle::default();
        let eq = EquivalenceParams::default();
        // engine declutched at 0.5 m/s and demand above what any candidate covers
        let q = EcmsQuery { speed: 0.5, gear: 1, soc: 0.6, total_demand: 390.0, dt: 1.0 };
        let d = ecms_action(&q, &[0.0, 100.0, 250.0], &v, &eq);
        assert!(!d.feasible);
        assert_eq!(d.action_index, 2);
    }
}
