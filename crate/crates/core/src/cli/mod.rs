//! The `rdem` command-line driver.
//!
//! ```text
//! rdem simulate|fit|predict|compare-oracle|diagnose --config <path>
//!      [--seed <u64>] [--out <dir>] [--particles <N>] [--u2 <f>] [--m <int>]
//! ```
//!
//! Exit codes: 0 success, 2 configuration error, 3 filter degeneracy, 4 I/O error.

mod commands;
mod config;

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use thiserror::Error;

pub use commands::{
    cmd_compare_oracle, cmd_diagnose, cmd_fit, cmd_predict, cmd_simulate, compare_samples,
    future_times, simulate_series, Comparison, MarginalComparison,
};
pub use config::{
    DiagnoseConfig, FilterSection, MuX0, OracleConfig, Overrides, PredictConfig, PriorConfig,
    RawConfig, Reference, RunConfig, SimulateConfig, FIRST_OBSERVATION,
};

use crate::diagnostics::DiagnosticsError;
use crate::filter::FilterError;
use crate::oracle::OracleError;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("filter degeneracy: {0}")]
    Degenerate(String),
    #[error("i/o error: {0}")]
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Degenerate(_) => 3,
            CliError::Io(_) => 4,
        }
    }
}

impl From<FilterError> for CliError {
    fn from(e: FilterError) -> Self {
        match e {
            FilterError::Config(_) | FilterError::EmptyProposal => CliError::Config(e.to_string()),
            FilterError::AllWeightsZero { .. } | FilterError::AllPredictionsDropped => {
                CliError::Degenerate(e.to_string())
            }
        }
    }
}

impl From<DiagnosticsError> for CliError {
    fn from(e: DiagnosticsError) -> Self {
        match e {
            DiagnosticsError::Filter(f) => f.into(),
            DiagnosticsError::DegenerateFit => CliError::Degenerate(e.to_string()),
            other => CliError::Config(other.to_string()),
        }
    }
}

impl From<OracleError> for CliError {
    fn from(e: OracleError) -> Self {
        CliError::Config(e.to_string())
    }
}

#[derive(Debug, Parser)]
#[command(name = "rdem", version, about = "Bayesian inference for ODE regression models")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a data set from the configured truth.
    Simulate(CommonArgs),
    /// Run the refined filter and write posterior samples and a summary.
    Fit(CommonArgs),
    /// Fit, then write predictive bands for the next observations.
    Predict(CommonArgs),
    /// Fit the cooling model and compare with its exact posterior.
    CompareOracle(CommonArgs),
    /// u² ladder, stability and convergence checks.
    Diagnose(CommonArgs),
}

#[derive(Debug, Clone, Args)]
pub struct CommonArgs {
    #[arg(long)]
    pub config: PathBuf,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub particles: Option<usize>,
    #[arg(long)]
    pub u2: Option<f64>,
    #[arg(long)]
    pub m: Option<usize>,
}

impl CommonArgs {
    pub fn load(&self) -> Result<RunConfig, CliError> {
        let overrides = Overrides {
            seed: self.seed,
            out: self.out.clone(),
            particles: self.particles,
            u2: self.u2,
            m: self.m,
        };
        RunConfig::load(&self.config, &overrides)
    }
}

pub fn run(cli: &Cli) -> Result<(), CliError> {
    match &cli.command {
        Command::Simulate(a) => cmd_simulate(&a.load()?),
        Command::Fit(a) => cmd_fit(&a.load()?).map(drop),
        Command::Predict(a) => cmd_predict(&a.load()?).map(drop),
        Command::CompareOracle(a) => cmd_compare_oracle(&a.load()?).map(drop),
        Command::Diagnose(a) => cmd_diagnose(&a.load()?),
    }
}

/// Parses the process arguments, runs the command and returns the exit code.
pub fn main() -> i32 {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => 0,
        Err(e) => {
            log::error!("{e}");
            e.exit_code()
        }
    }
}
