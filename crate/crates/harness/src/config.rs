//! Experiment configuration: one TOML file, every field optional.

use std::path::{Path, PathBuf};

use hev_core::driver_cycle::{DriverGains, PedalMap};
use hev_core::powertrain::{Vehicle, VehicleParams};
use hev_core::qlearning::{Discretization, HevEnv, Hyperparams};
use hev_core::supervisory::EquivalenceParams;
use hev_core::warmstart::{HeuristicRule, Initializer};
use serde::{Deserialize, Serialize};

use crate::error::{HarnessError, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimulationParams {
    pub initial_soc: f64,
    /// kg/L
    pub fuel_density: f64,
    /// rad
    pub grade: f64,
}

impl Default for SimulationParams {
    fn default() -> Self {
        Self { initial_soc: 0.6, fuel_density: 0.745, grade: 0.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CycleConfig {
    /// Cycle used for training and for `eval`/`ecms-eval` when `--cycle` is absent.
    pub train: PathBuf,
    /// Cycles a trained table is cross-checked on by `compare`.
    pub validate: Vec<PathBuf>,
}

impl Default for CycleConfig {
    fn default() -> Self {
        Self {
            train: PathBuf::from("cycles/udds.csv"),
            validate: vec![PathBuf::from("cycles/hwfet.csv"), PathBuf::from("cycles/wltp_class3.csv")],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub initializer: Initializer,
    pub seeds: Vec<u64>,
    pub out: PathBuf,
    pub cycles: CycleConfig,
    pub hyper: Hyperparams,
    pub heuristic: HeuristicRule,
    pub simulation: SimulationParams,
    pub driver: DriverGains,
    pub pedal: PedalMap,
    pub equivalence: EquivalenceParams,
    pub discretization: Discretization,
    pub vehicle: VehicleParams,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            initializer: Initializer::Cold,
            seeds: vec![0, 1, 2, 3, 4],
            out: PathBuf::from("out"),
            cycles: CycleConfig::default(),
            hyper: Hyperparams::default(),
            heuristic: HeuristicRule::default(),
            simulation: SimulationParams::default(),
            driver: DriverGains::default(),
            pedal: PedalMap::default(),
            equivalence: EquivalenceParams::default(),
            discretization: Discretization::default(),
            vehicle: VehicleParams::default(),
        }
    }
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| HarnessError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Reads `path`, or returns the defaults when no path is given.
    pub fn load(path: Option<&Path>) -> Result<Self> {
        match path {
            None => Ok(Self::default()),
            Some(p) => {
                let text = std::fs::read_to_string(p).map_err(|e| HarnessError::io(p, e))?;
                Self::from_toml(&text)
            }
        }
    }

    pub fn validate(&self) -> Result<()> {
        let cfg = |m: String| HarnessError::Config(m);
        self.vehicle.validate().map_err(|e| cfg(e.to_string()))?;
        self.hyper.validate().map_err(|e| cfg(e.to_string()))?;
        self.discretization.validate().map_err(|e| cfg(e.to_string()))?;
        self.equivalence.validate().map_err(cfg)?;
        self.heuristic.validate().map_err(cfg)?;
        if self.seeds.is_empty() {
            return Err(cfg("at least one seed is required".into()));
        }
        let b = &self.vehicle.battery;
        let s = &self.simulation;
        if !(b.soc_min..=b.soc_max).contains(&s.initial_soc) {
            return Err(cfg(format!("initial SOC {} outside [{}, {}]", s.initial_soc, b.soc_min, b.soc_max)));
        }
        if !(s.fuel_density > 0.0 && s.grade.is_finite()) {
            return Err(cfg("fuel density must be positive and grade finite".into()));
        }
        if !(self.pedal.reference_torque > 0.0 && self.pedal.brake_torque_min < 0.0 && self.pedal.throttle_reference_ratio > 0.0) {
            return Err(cfg("pedal map needs positive reference torque and ratio, negative brake torque".into()));
        }
        if !(self.driver.kp >= 0.0 && self.driver.ki >= 0.0 && self.driver.kd >= 0.0) {
            return Err(cfg("driver gains must be non-negative".into()));
        }
        Ok(())
    }

    pub fn env(&self) -> Result<HevEnv> {
        let vehicle = Vehicle::new(self.vehicle.clone()).map_err(|e| HarnessError::Config(e.to_string()))?;
        Ok(HevEnv {
            vehicle,
            driver: self.driver,
            pedal: self.pedal,
            equivalence: self.equivalence,
            discretization: self.discretization.clone(),
            initial_soc: self.simulation.initial_soc,
            fuel_density: self.simulation.fuel_density,
            grade: self.simulation.grade,
        })
    }

    /// Hyperparameters for one seed.
    pub fn hyper_for(&self, seed: u64) -> Hyperparams {
        Hyperparams { seed, ..self.hyper }
    }

    /// The resolved configuration as TOML.
    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config always serializes")
    }
}
