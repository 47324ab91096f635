//! Batch front end: `simulate`, `identify`, `region` and `sweep` driven by a
//! TOML experiment file, writing CSV grids and a JSON summary.

mod commands;
mod config;
mod output;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use thiserror::Error;

pub use commands::{cmd_identify, cmd_region, cmd_simulate, cmd_sweep, IdentifyOutcome, Summary};
pub use config::{
    AtomsConfig, ContextConfig, CopulaConfig, ExperimentConfig, MixtureConfig, RectangleConfig, RegionConfig, RunConfig,
    ScenarioConfig, SimulateConfig, SweepConfig,
};
pub use output::{provenance_line, Provenance};

pub const EXIT_OK: i32 = 0;
pub const EXIT_VALIDATION: i32 = 2;
pub const EXIT_INFEASIBLE: i32 = 3;
pub const EXIT_IO: i32 = 4;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("parse error at line {line}, column {column} ({path}): {message}")]
    Parse {
        path: String,
        line: usize,
        column: usize,
        message: String,
    },
    #[error("unknown key at {path}: {message}")]
    UnknownKey { path: String, message: String },
    #[error("invalid {path}: {message}")]
    Validation { path: String, message: String },
    #[error("{0}")]
    Infeasible(String),
    #[error("{}: {message}", .path.display())]
    Io { path: PathBuf, message: String },
}

impl CliError {
    pub fn validation(path: &str, e: impl std::fmt::Display) -> Self {
        Self::Validation {
            path: path.to_string(),
            message: e.to_string(),
        }
    }

    pub fn io(path: impl Into<PathBuf>, e: impl std::fmt::Display) -> Self {
        Self::Io {
            path: path.into(),
            message: e.to_string(),
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Parse { .. } | Self::UnknownKey { .. } | Self::Validation { .. } => EXIT_VALIDATION,
            Self::Infeasible(_) => EXIT_INFEASIBLE,
            Self::Io { .. } => EXIT_IO,
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "ctxrisk", version, about = "Simulate and identify context-dependent risk preference mixtures")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args, Clone, Default)]
pub struct CommonArgs {
    /// Experiment config (TOML). Defaults apply when omitted.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Worker threads; results do not depend on it.
    #[arg(long)]
    pub workers: Option<usize>,
    /// Output directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Draw agents and their choices at random prices.
    Simulate {
        #[command(flatten)]
        common: CommonArgs,
        /// Also write type, parameters and consideration sets.
        #[arg(long)]
        truth_columns: bool,
    },
    /// Recover shares, marginals and copula.
    Identify {
        #[command(flatten)]
        common: CommonArgs,
        /// Estimate from a simulated dataset instead of exact probabilities.
        #[arg(long)]
        dataset: Option<PathBuf>,
    },
    /// Bundle chosen on a (ν, ω) lattice at fixed prices.
    Region {
        #[command(flatten)]
        common: CommonArgs,
    },
    /// One identify run per value of a config parameter.
    Sweep {
        #[command(flatten)]
        common: CommonArgs,
    },
}

/// Loads the config and applies command-line overrides.
pub fn resolve_config(common: &CommonArgs) -> Result<ExperimentConfig, CliError> {
    let mut cfg = match &common.config {
        Some(path) => ExperimentConfig::load(path)?,
        None => ExperimentConfig::default(),
    };
    if let Some(seed) = common.seed {
        cfg.run.seed = seed;
    }
    if let Some(w) = common.workers {
        cfg.run.workers = w;
    }
    if let Some(out) = &common.out {
        cfg.run.out_dir = out.clone();
    }
    Ok(cfg)
}

fn execute(cli: Cli) -> Result<i32, CliError> {
    let common = match &cli.command {
        Command::Simulate { common, .. }
        | Command::Identify { common, .. }
        | Command::Region { common }
        | Command::Sweep { common } => common,
    };
    let mut cfg = resolve_config(common)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.run.workers)
        .build()
        .map_err(|e| CliError::validation("run.workers", e))?;
    pool.install(|| match &cli.command {
        Command::Simulate { truth_columns, .. } => {
            cfg.simulate.truth_columns |= *truth_columns;
            cmd_simulate(&cfg).map(|_| EXIT_OK)
        }
        Command::Identify { dataset, .. } => cmd_identify(&cfg, dataset.as_deref()).map(|o| o.exit_code()),
        Command::Region { .. } => cmd_region(&cfg).map(|_| EXIT_OK),
        Command::Sweep { .. } => cmd_sweep(&cfg),
    })
}

/// Entry point for the binary; returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_VALIDATION } else { EXIT_OK };
        }
    };
    match execute(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
