//! ECMS against a brute-force scan that realizes every candidate through the
//! plant itself.

use hev_core::powertrain::{plant_step, select_gear, ActuatorCommand, PlantState, Vehicle};
use hev_core::qlearning::Discretization;
use hev_core::supervisory::{ecms_action, equivalent_fuel_rate, EcmsQuery, EquivalenceParams};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Index of the cheapest candidate that the plant realizes without clamping,
/// or `None` when every candidate gets clamped.
fn scan(query: &EcmsQuery, actions: &[f64], vehicle: &Vehicle, eq: &EquivalenceParams) -> Option<usize> {
    let share = vehicle.params.em_to_input_frame(query.gear);
    let state = PlantState { speed: query.speed, soc: query.soc, gear: query.gear, time: 0.0 };
    let mut best: Option<(usize, f64)> = None;
    for (k, &a) in actions.iter().enumerate() {
        let em = if a > 0.0 { a.min(query.total_demand.max(0.0) / share) } else { a };
        let cmd = ActuatorCommand { engine_torque: query.total_demand - em * share, em_torque: em, brake_torque: 0.0 };
        let out = plant_step(&state, &cmd, 0.0, query.dt, vehicle);
        if out.clamps.any_actuator() {
            continue;
        }
        let cost = out.fuel_rate_engine + equivalent_fuel_rate(out.battery_power, eq);
        let better = match best {
            None => true,
            Some((b, c)) => cost < c || (cost == c && a.abs() < actions[b].abs()),
        };
        if better {
            best = Some((k, cost));
        }
    }
    best.map(|(k, _)| k)
}

#[test]
fn ecms_matches_exhaustive_scan_on_random_states() {
    let vehicle = Vehicle::default();
    let eq = EquivalenceParams::default();
    let actions = Discretization::default().action_values;
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut feasible = 0;
    for _ in 0..1000 {
        let speed = rng.gen_range(0.0..30.0);
        let query = EcmsQuery {
            speed,
            gear: select_gear(speed, 1, &vehicle.params),
            soc: rng.gen_range(0.4..=0.8),
            total_demand: rng.gen_range(0.0..400.0),
            dt: 1.0,
        };
        let d = ecms_action(&query, &actions, &vehicle, &eq);
        match scan(&query, &actions, &vehicle, &eq) {
            Some(k) => {
                feasible += 1;
                assert!(d.feasible, "{query:?}");
                assert_eq!(d.action_index, k, "{query:?}");
            }
            None => assert!(!d.feasible, "{query:?}"),
        }
    }
    assert!(feasible > 500, "only {feasible} feasible states");
}

#[test]
fn low_speed_high_demand_uses_large_motor_torque() {
    let vehicle = Vehicle::default();
    let eq = EquivalenceParams::default();
    let actions = Discretization::default().action_values;
    for mph in [2.0, 8.0, 15.0, 19.0] {
        let speed = mph * 0.44704;
        let query = EcmsQuery { speed, gear: select_gear(speed, 1, &vehicle.params), soc: 0.6, total_demand: 300.0, dt: 1.0 };
        let d = ecms_action(&query, &actions, &vehicle, &eq);
        assert!(d.decision.em_torque >= 150.0, "{mph} mph: {:?}", d);
    }
}
