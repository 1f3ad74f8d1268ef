//! Batch front end for the heartbeat-amplitude trend pipeline: generate
//! synthetic data, extract per-beat measurements from raw ECG, run the
//! cohort analysis, and render the results.

pub mod commands;
pub mod config;
pub mod error;
pub mod formats;
pub mod manifest;
pub mod plot;

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use config::PipelineConfig;
use error::CliError;

#[derive(Debug, Parser)]
#[command(
    name = "ecgtrend",
    version,
    about = "Trend analysis of per-beat ECG amplitudes across an exercise cohort"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct Common {
    /// Key = value configuration file.
    #[arg(long, value_name = "PATH")]
    pub config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, value_name = "DIR", default_value = "out")]
    pub out: PathBuf,
    /// Override the configured random seed.
    #[arg(long, value_name = "N")]
    pub seed: Option<u64>,
    /// Override one configuration key (repeatable).
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub set: Vec<String>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write a synthetic dataset (beat tables or raw ECG records).
    Simulate {
        #[command(flatten)]
        common: Common,
    },
    /// Detect beats in raw ECG CSVs and write per-beat measurement tables.
    Ingest {
        /// ECG CSV files or directories of them.
        #[arg(required = true)]
        inputs: Vec<PathBuf>,
        #[command(flatten)]
        common: Common,
    },
    /// Register, normalize, smooth, and test a cohort of beat tables.
    Analyze {
        /// Beat-table CSV files or directories of them.
        #[arg(required = true)]
        inputs: Vec<PathBuf>,
        #[command(flatten)]
        common: Common,
    },
    /// Summarize a finished analysis; optionally draw SVG plots.
    Report {
        /// Directory holding `analyze` outputs.
        analysis_dir: PathBuf,
        /// Also render the band tables as SVG plots.
        #[arg(long)]
        svg: bool,
        #[command(flatten)]
        common: Common,
    },
}

/// Run a parsed invocation; returns the process exit code.
pub fn run(cli: Cli) -> i32 {
    match dispatch(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("ecgtrend: error: {e}");
            e.exit_code()
        }
    }
}

fn dispatch(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Simulate { common } => {
            let cfg = load(&common)?;
            commands::cmd_simulate(&cfg, &common.out)
        }
        Command::Ingest { inputs, common } => {
            let cfg = load(&common)?;
            commands::cmd_ingest(&inputs, &cfg, &common.out)
        }
        Command::Analyze { inputs, common } => {
            let cfg = load(&common)?;
            commands::cmd_analyze(&inputs, &cfg, &common.out)
        }
        Command::Report { analysis_dir, svg, common } => {
            let cfg = load(&common)?;
            commands::cmd_report(&analysis_dir, &cfg, &common.out, svg)
        }
    }
}

fn load(common: &Common) -> Result<PipelineConfig, CliError> {
    Ok(PipelineConfig::load(
        common.config.as_deref(),
        &common.set,
        common.seed,
    )?)
}
