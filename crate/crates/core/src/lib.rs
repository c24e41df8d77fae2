//! Parallel-HEV energy management with tabular Q-learning.
//!
//! The crate is organized bottom-up:
//!
//! * [`powertrain`]: forward-looking vehicle plant (road loads, engine and
//!   motor torque paths, fuel map, battery).
//! * [`driver_cycle`]: drive-cycle ingestion and the PID driver.
//! * [`supervisory`]: equivalent fuel, reward and the ECMS controller.
//! * [`qlearning`]: discretization, Q-table, epsilon-greedy rollouts and the
//!   experience-filtered training loop.
//! * [`warmstart`]: cold, heuristic and ECMS Q-table initializers.

pub mod driver_cycle;
pub mod powertrain;
pub mod qlearning;
pub mod supervisory;
pub mod units;
pub mod warmstart;
