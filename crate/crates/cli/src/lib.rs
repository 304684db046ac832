//! Experiment runner for tensor-ring variational circuits: config loading,
//! data pipelines and the `train`, `verify`, `bench` and `sweep` commands.

pub mod commands;
pub mod config;

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use crate::commands::SweepAxis;
use crate::config::{ConfigError, ExperimentConfig};

#[derive(Debug, thiserror::Error)]
pub enum AppError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("data error: {0}")]
    Data(String),
    #[error("verification failed: {0}")]
    Verification(String),
    #[error("{0}")]
    Other(String),
}

impl AppError {
    /// 2 config, 3 data or I/O, 4 failed verification, 1 anything else.
    pub fn exit_code(&self) -> i32 {
        match self {
            AppError::Config(ConfigError::Read { .. }) => 3,
            AppError::Config(_) => 2,
            AppError::Data(_) => 3,
            AppError::Verification(_) => 4,
            AppError::Other(_) => 1,
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "trvqc", version, about = "Tensor-ring variational quantum classifier")]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalOpts,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct GlobalOpts {
    /// Experiment config (TOML).
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Overrides the config seed.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Overrides the config output directory.
    #[arg(long, global = true)]
    pub out_dir: Option<PathBuf>,
    /// Worker threads for per-sample gradients (default: all cores).
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// Run single-threaded.
    #[arg(long, global = true)]
    pub deterministic: bool,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Train a classifier from the config.
    Train,
    /// Compare full-rank rings with the statevector simulator and
    /// finite-difference gradients.
    Verify {
        #[arg(long, default_value_t = 8)]
        max_qubits: usize,
        #[arg(long, default_value_t = 3)]
        depth: usize,
        #[arg(long, default_value_t = 20)]
        trials: usize,
        #[arg(long, default_value_t = true, action = clap::ArgAction::Set)]
        wrap: bool,
    },
    /// Time forward passes for several qubit counts at a fixed rank.
    Bench {
        #[arg(long, value_delimiter = ',', default_values_t = [8, 16, 32, 64])]
        qubits: Vec<usize>,
        #[arg(long, default_value_t = 4)]
        rank: usize,
        #[arg(long, default_value_t = 2)]
        depth: usize,
        #[arg(long, default_value_t = 100)]
        reps: usize,
    },
    /// Train once per rank or per depth and tabulate accuracy.
    Sweep {
        #[arg(long, value_delimiter = ',', conflicts_with = "layers", required_unless_present = "layers")]
        ranks: Option<Vec<usize>>,
        #[arg(long, value_delimiter = ',')]
        layers: Option<Vec<usize>>,
    },
}

fn load_config(g: &GlobalOpts) -> Result<ExperimentConfig, AppError> {
    let path = g.config.as_ref().ok_or(ConfigError::Field { field: "--config", message: "required for this command".into() })?;
    let mut cfg = ExperimentConfig::load(path)?;
    if let Some(s) = g.seed {
        cfg.seed = s;
    }
    if let Some(d) = &g.out_dir {
        cfg.out_dir = d.clone();
    }
    Ok(cfg)
}

pub fn run(cli: Cli) -> Result<(), AppError> {
    let g = &cli.global;
    if let Some(n) = g.threads {
        if n == 0 {
            return Err(ConfigError::Field { field: "--threads", message: "must be at least 1".into() }.into());
        }
        // A second call in the same process keeps the first pool.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    let parallel = !g.deterministic;
    let seed = g.seed.unwrap_or(0);
    match &cli.command {
        Command::Train => commands::cmd_train(&load_config(g)?, parallel).map(drop),
        Command::Verify { max_qubits, depth, trials, wrap } => {
            commands::cmd_verify(*max_qubits, *depth, *trials, seed, *wrap).map(drop)
        }
        Command::Bench { qubits, rank, depth, reps } => {
            commands::cmd_bench(qubits, *rank, *depth, *reps, seed, g.out_dir.as_deref()).map(drop)
        }
        Command::Sweep { ranks, layers } => {
            let cfg = load_config(g)?;
            let (axis, values) = match (ranks, layers) {
                (Some(r), _) => (SweepAxis::Ranks, r),
                (_, Some(l)) => (SweepAxis::Layers, l),
                _ => unreachable!("clap requires one of them"),
            };
            commands::cmd_sweep(&cfg, axis, values, parallel).map(drop)
        }
    }
}
