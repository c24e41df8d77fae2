//! Internal-resistance battery pack with constant open-circuit voltage.

use serde::{Deserialize, Serialize};

use super::PowertrainError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BatteryParams {
    /// A*h per cell
    pub cell_capacity: f64,
    pub series_cells: u32,
    pub parallel_strings: u32,
    /// V per cell
    pub cell_ocv: f64,
    /// ohm per cell
    pub cell_internal_resistance: f64,
    pub soc_min: f64,
    pub soc_max: f64,
    /// W, pack terminal
    pub max_discharge_power: f64,
    /// W, pack terminal, positive number
    pub max_charge_power: f64,
}

impl Default for BatteryParams {
    fn default() -> Self {
        Self {
            cell_capacity: 6.5,
            series_cells: 250,
            parallel_strings: 1,
            cell_ocv: 3.2,
            cell_internal_resistance: 1.5e-3,
            soc_min: 0.4,
            soc_max: 0.8,
            max_discharge_power: 80_000.0,
            max_charge_power: 80_000.0,
        }
    }
}

impl BatteryParams {
    pub fn validate(&self) -> Result<(), PowertrainError> {
        let bad = |m: &str| Err(PowertrainError::InvalidParams(format!("battery: {m}")));
        if !(self.cell_capacity > 0.0 && self.cell_ocv > 0.0 && self.cell_internal_resistance >= 0.0) {
            return bad("capacity and OCV must be positive, resistance non-negative");
        }
        if self.series_cells == 0 || self.parallel_strings == 0 {
            return bad("cell counts must be positive");
        }
        if !(0.0 <= self.soc_min && self.soc_min < self.soc_max && self.soc_max <= 1.0) {
            return bad("need 0 <= soc_min < soc_max <= 1");
        }
        if !(self.max_discharge_power > 0.0 && self.max_charge_power > 0.0) {
            return bad("power limits must be positive");
        }
        Ok(())
    }

    pub fn pack_ocv(&self) -> f64 {
        self.series_cells as f64 * self.cell_ocv
    }

    pub fn pack_resistance(&self) -> f64 {
        self.series_cells as f64 * self.cell_internal_resistance / self.parallel_strings as f64
    }

    /// A*h
    pub fn pack_capacity(&self) -> f64 {
        self.parallel_strings as f64 * self.cell_capacity
    }

    /// Wh at nominal voltage.
    pub fn pack_energy(&self) -> f64 {
        self.pack_ocv() * self.pack_capacity()
    }

    /// Largest terminal power the pack can physically deliver, U_oc^2 / 4R.
    pub fn deliverable_power(&self) -> f64 {
        let r = self.pack_resistance();
        if r == 0.0 {
            f64::INFINITY
        } else {
            self.pack_ocv().powi(2) / (4.0 * r)
        }
    }

    /// Current drawn for terminal power `power` (positive = discharge), the
    /// physical (smaller magnitude) root of `P = I (U_oc - I R)`. `None`
    /// when the discriminant is negative.
    pub fn current_for_power(&self, power: f64) -> Option<f64> {
        let u = self.pack_ocv();
        let r = self.pack_resistance();
        let disc = u * u - 4.0 * r * power;
        if disc < 0.0 {
            return None;
        }
        // 2P / (U + sqrt(D)) avoids cancellation for small P
        Some(2.0 * power / (u + disc.sqrt()))
    }

    /// SOC change for a constant current over `dt` seconds.
    pub fn soc_delta(&self, current: f64, dt: f64) -> f64 {
        -current * dt / (self.pack_capacity() * 3600.0)
    }

    /// Terminal power that moves SOC exactly to `target` over `dt`. When the
    /// required discharge current lies beyond the pack's power peak the SOC
    /// bound cannot bind, and the deliverable power is returned instead.
    pub fn power_to_reach_soc(&self, soc: f64, target: f64, dt: f64) -> f64 {
        let current = (soc - target) * self.pack_capacity() * 3600.0 / dt;
        let r = self.pack_resistance();
        if r > 0.0 && current > self.pack_ocv() / (2.0 * r) {
            return self.deliverable_power();
        }
        current * (self.pack_ocv() - current * r)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BatteryStep {
    pub soc: f64,
    pub current: f64,
    pub terminal_voltage: f64,
    /// Realized terminal power, W.
    pub power: f64,
    /// Requested power exceeded what the pack can deliver.
    pub power_limited: bool,
    /// SOC left the window and was clamped back.
    pub soc_clamped: bool,
}

/// Advances the pack by `dt` seconds at constant terminal power.
pub fn battery_step(power: f64, soc: f64, dt: f64, params: &BatteryParams) -> BatteryStep {
    let (power, power_limited) = match params.current_for_power(power) {
        Some(_) => (power, false),
        None => (params.deliverable_power(), true),
    };
    let current = params.current_for_power(power).unwrap_or(params.pack_ocv() / (2.0 * params.pack_resistance()));
    let raw = soc + params.soc_delta(current, dt);
    let clamped = raw.clamp(params.soc_min, params.soc_max);
    BatteryStep {
        soc: clamped,
        current,
        terminal_voltage: params.pack_ocv() - current * params.pack_resistance(),
        power,
        power_limited,
        soc_clamped: clamped != raw,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rel(a: f64, b: f64) -> f64 {
        ((a - b) / b).abs()
    }

    #[test]
    fn zero_power_is_rest() {
        let p = BatteryParams::default();
        let s = battery_step(0.0, 0.6, 1.0, &p);
        assert_eq!(s.soc, 0.6);
        assert_eq!(s.current, 0.0);
        assert_eq!(s.terminal_voltage, 800.0);
    }

    #[test]
    fn capacity_definition() {
        let p = BatteryParams::default();
        assert_eq!(p.soc_delta(6.5, 3600.0), -1.0);
    }

    #[test]
    fn pack_matches_rated_energy() {
        let p = BatteryParams::default();
        assert!(rel(p.pack_energy(), 5200.0) < 0.05);
        assert!((p.pack_resistance() - 0.375).abs() < 1e-15);
    }

    #[test]
    fn ten_kilowatt_discharge_current() {
        let p = BatteryParams::default();
        // independent quadratic-formula root of 0.375 I^2 - 800 I + 10000 = 0
        let oracle = (800.0 - (800.0f64 * 800.0 - 4.0 * 0.375 * 10_000.0).sqrt()) / (2.0 * 0.375);
        let s = battery_step(10_000.0, 0.6, 1.0, &p);
        assert!(rel(s.current, oracle) < 1e-9);
        assert!((s.current - 12.57).abs() < 0.01);
        assert!(rel(s.terminal_voltage * s.current, 10_000.0) < 1e-9);
    }

    #[test]
    fn constant_current_closed_form() {
        let p = BatteryParams::default();
        let power = 15_000.0;
        let i = p.current_for_power(power).unwrap();
        let mut soc = 0.6;
        for _ in 0..100 {
            soc = battery_step(power, soc, 1.0, &p).soc;
        }
        let closed = 0.6 - i * 100.0 / (6.5 * 3600.0);
        assert!(rel(soc, closed) < 1e-9);
    }

    #[test]
    fn excessive_power_is_limited() {
        let p = BatteryParams::default();
        let s = battery_step(1e9, 0.6, 1.0, &p);
        assert!(s.power_limited);
        assert_eq!(s.power, p.deliverable_power());
        assert!((s.current - 800.0 / 0.75).abs() < 1e-9);
    }

    #[test]
    fn soc_clamps_at_window() {
        let p = BatteryParams::default();
        let s = battery_step(50_000.0, 0.4001, 10.0, &p);
        assert!(s.soc_clamped);
        assert_eq!(s.soc, 0.4);
        let c = battery_step(-50_000.0, 0.7999, 10.0, &p);
        assert!(c.soc_clamped);
        assert_eq!(c.soc, 0.8);
    }

    #[test]
    fn power_to_reach_soc_round_trips() {
        let p = BatteryParams::default();
        let power = p.power_to_reach_soc(0.41, 0.4, 1.0);
        let s = battery_step(power, 0.41, 1.0, &p);
        assert!((s.soc - 0.4).abs() < 1e-12);
    }
}
