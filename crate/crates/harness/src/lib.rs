//! Configuration, persistence and experiment orchestration behind the
//! `hevq` command-line tool.

pub mod cli;
pub mod commands;
pub mod config;
pub mod error;
pub mod experiment;
pub mod persist;

pub use error::{HarnessError, Result};
