//! `amp` — config-driven experiments with anchored neural networks:
//! train, eval, ablate, ntk, sweep, and standalone metrics.

mod commands;
mod config;

use std::fmt;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

/// Errors split by exit code: config problems exit 2, runtime/numerical
/// problems exit 3.
#[derive(Debug)]
pub enum CliError {
    Config(String),
    Runtime(String),
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Config(m) => write!(f, "config error: {m}"),
            CliError::Runtime(m) => write!(f, "error: {m}"),
        }
    }
}

impl From<amp_core::AmpError> for CliError {
    fn from(e: amp_core::AmpError) -> Self {
        CliError::Runtime(e.to_string())
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Runtime(format!("io: {e}"))
    }
}

#[derive(Parser)]
#[command(name = "amp", version, about = "Anchored-network OOD detection experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, clap::Args)]
struct CommonArgs {
    /// Experiment config (TOML).
    #[arg(long)]
    config: PathBuf,
    /// Output directory (overrides the config's output.dir).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Global seed (overrides the config's seed).
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Subcommand)]
enum Command {
    /// Train a model and write a checkpoint plus a per-epoch trace CSV.
    Train(CommonArgs),
    /// Score ID and OOD sets with a trained model and report metrics.
    Eval {
        #[command(flatten)]
        common: CommonArgs,
        /// Checkpoint path (default: <out>/model.ckpt).
        #[arg(long)]
        checkpoint: Option<PathBuf>,
    },
    /// Anchor-count x transform-set ablation grid (FPR95 matrix).
    Ablate(CommonArgs),
    /// Kernel spectra, convergence report, and anchored decision maps.
    Ntk(CommonArgs),
    /// Metrics and score histograms across corruption levels 1..5.
    Sweep {
        #[command(flatten)]
        common: CommonArgs,
        /// Checkpoint path (default: <out>/model.ckpt; trains if absent).
        #[arg(long)]
        checkpoint: Option<PathBuf>,
    },
    /// Standalone metric computation from an existing score CSV.
    Metrics {
        /// Score table produced by `amp eval`.
        scores: PathBuf,
        /// Output directory (default: alongside the score CSV).
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn load_config(common: &CommonArgs) -> Result<config::ExperimentConfig, CliError> {
    let mut cfg = config::ExperimentConfig::load(&common.config)?;
    if let Some(seed) = common.seed {
        cfg.seed = seed;
    }
    if let Some(out) = &common.out {
        cfg.output.dir = out.clone();
    }
    Ok(cfg)
}

fn run() -> Result<(), CliError> {
    let cli = Cli::parse();
    match cli.command {
        Command::Train(common) => commands::train::run(&load_config(&common)?),
        Command::Eval { common, checkpoint } => {
            commands::eval::run(&load_config(&common)?, checkpoint.as_deref())
        }
        Command::Ablate(common) => commands::ablate::run(&load_config(&common)?),
        Command::Ntk(common) => commands::ntk_cmd::run(&load_config(&common)?),
        Command::Sweep { common, checkpoint } => {
            commands::sweep::run(&load_config(&common)?, checkpoint.as_deref())
        }
        Command::Metrics { scores, out } => commands::metrics_cmd::run(&scores, out.as_deref()),
    }
}

fn main() -> ExitCode {
    match run() {
        Ok(()) => ExitCode::SUCCESS,
        Err(e @ CliError::Config(_)) => {
            eprintln!("{e}");
            ExitCode::from(2)
        }
        Err(e @ CliError::Runtime(_)) => {
            eprintln!("{e}");
            ExitCode::from(3)
        }
    }
}
