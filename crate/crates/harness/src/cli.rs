//! Command-line interface.

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use hev_core::warmstart::Initializer;

use crate::config::ExperimentConfig;
use crate::error::{HarnessError, Result};

#[derive(Debug, Parser)]
#[command(name = "hevq", version, about = "Q-learning energy management for a parallel HEV, with warm-start studies")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Train one Q-table per seed from the chosen initializer.
    Train(Common),
    /// Evaluate a saved Q-table greedily on a cycle.
    Eval {
        #[command(flatten)]
        common: Common,
        /// Q-table file written by `train`.
        #[arg(long)]
        qtable: PathBuf,
    },
    /// Run the ECMS baseline on a cycle.
    EcmsEval(Common),
    /// Train every initializer over all seeds and write the comparison report.
    Compare(Common),
    /// Parse and check a drive-cycle file.
    CycleValidate(Common),
}

/// Options shared by every command. Each one overrides the matching config
/// field.
#[derive(Debug, Args, Clone, Default)]
pub struct Common {
    /// TOML configuration file; defaults apply to anything it omits.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Drive-cycle CSV (`time_s,speed_mph` or `time_s,speed_mps`).
    #[arg(long)]
    pub cycle: Option<PathBuf>,
    #[arg(long, value_parser = parse_init)]
    pub init: Option<Initializer>,
    #[arg(long)]
    pub iterations: Option<usize>,
    /// Comma-separated list, e.g. `0,1,2`.
    #[arg(long, value_delimiter = ',')]
    pub seeds: Option<Vec<u64>>,
    /// Output directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

fn parse_init(s: &str) -> std::result::Result<Initializer, String> {
    s.parse()
}

impl Common {
    /// Loads the config file and applies the command-line overrides.
    pub fn resolve(&self) -> Result<ExperimentConfig> {
        let mut cfg = ExperimentConfig::load(self.config.as_deref())?;
        if let Some(c) = &self.cycle {
            cfg.cycles.train = c.clone();
        }
        if let Some(i) = self.init {
            cfg.initializer = i;
        }
        if let Some(n) = self.iterations {
            cfg.hyper.iterations = n;
        }
        if let Some(s) = &self.seeds {
            cfg.seeds = s.clone();
        }
        if let Some(o) = &self.out {
            cfg.out = o.clone();
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

/// Parses `args` (including the program name) and runs the command.
pub fn run_from<I, T>(args: I) -> Result<String>
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = Cli::try_parse_from(args).map_err(|e| HarnessError::Config(e.to_string()))?;
    crate::commands::dispatch(&cli.command)
}
