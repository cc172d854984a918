use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use mobelcov_core::env::ObjectivePair;
use mobelcov_core::epi::Mode;
use mobelcov_core::nn::Arch;

/// Multi-objective epidemic-control experiments.
#[derive(Debug, Parser)]
#[command(name = "mobelcov", version, about)]
pub struct Cli {
    #[command(flatten)]
    pub common: Common,
    #[command(subcommand)]
    pub command: Command,
}

/// Options shared by every subcommand. Flags beat environment variables,
/// which beat the config file.
#[derive(Debug, Args)]
pub struct Common {
    /// Run configuration (TOML).
    #[arg(long, global = true, env = "MOBELCOV_CONFIG")]
    pub config: Option<PathBuf>,
    /// Epidemiological parameter file (TOML); defaults to the shipped set.
    #[arg(long, global = true, env = "MOBELCOV_PARAMS")]
    pub params: Option<PathBuf>,
    /// Master seed.
    #[arg(long, global = true, env = "MOBELCOV_SEED")]
    pub seed: Option<u64>,
    /// Transition model: ode or binomial.
    #[arg(long, global = true, env = "MOBELCOV_MODE")]
    pub mode: Option<Mode>,
    /// Objective pair: arh-sb or ari-sb.
    #[arg(long, global = true, env = "MOBELCOV_OBJECTIVES")]
    pub objectives: Option<ObjectivePair>,
    /// Training budget in environment steps.
    #[arg(long, global = true, env = "MOBELCOV_STEPS")]
    pub steps: Option<usize>,
    /// Output directory.
    #[arg(long, global = true, env = "MOBELCOV_OUT")]
    pub out: Option<PathBuf>,
    /// Episodes averaged per policy on the stochastic model.
    #[arg(long, global = true, env = "MOBELCOV_REPEATS")]
    pub repeats: Option<usize>,
    /// Exploration noise on actions.
    #[arg(long, global = true, env = "MOBELCOV_EXPLORATION_NOISE")]
    pub exploration_noise: Option<f64>,
    /// Noise on desired returns when picking exploration targets.
    #[arg(long, global = true, env = "MOBELCOV_RETURN_NOISE")]
    pub return_noise: Option<f64>,
    /// Run with one thread.
    #[arg(long, global = true)]
    pub sequential: bool,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Train PCN; writes a checkpoint, the coverage set and the training log.
    Train {
        #[arg(long)]
        arch: Option<Arch>,
    },
    /// Fixed-policy baseline sweep.
    Sweep {
        /// Number of levels in [0, 1].
        #[arg(long)]
        levels: Option<usize>,
    },
    /// Re-executes a trained coverage set and compares achieved with desired
    /// returns.
    Evaluate {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        coverage: PathBuf,
    },
    /// Hypervolume and epsilon indicators of point sets against a front.
    Metrics {
        /// Reference front (CSV with x/y, return_0/1 or achieved_return_0/1).
        #[arg(long)]
        front: PathBuf,
        /// Sets to score, as NAME=PATH.
        #[arg(long = "set", value_parser = parse_named)]
        sets: Vec<(String, PathBuf)>,
        /// Hypervolume reference point as X,Y in the CSV units.
        #[arg(long, value_parser = parse_pair, conflicts_with = "normalize")]
        reference: Option<[f64; 2]>,
        /// Normalize all sets with their joint bounds; reference (0, 0).
        #[arg(long)]
        normalize: bool,
    },
    /// Daily hospitalizations, deaths and actions of selected policies.
    Rollout {
        #[arg(long, requires = "coverage")]
        checkpoint: Option<PathBuf>,
        #[arg(long, requires = "checkpoint")]
        coverage: Option<PathBuf>,
        /// Fixed-policy levels to include, comma separated.
        #[arg(long, value_delimiter = ',')]
        levels: Vec<f64>,
    },
}

fn parse_named(s: &str) -> Result<(String, PathBuf), String> {
    let (name, path) = s.split_once('=').ok_or_else(|| format!("expected NAME=PATH, got {s:?}"))?;
    if name.is_empty() || path.is_empty() {
        return Err(format!("expected NAME=PATH, got {s:?}"));
    }
    Ok((name.to_string(), PathBuf::from(path)))
}

fn parse_pair(s: &str) -> Result<[f64; 2], String> {
    let (a, b) = s.split_once(',').ok_or_else(|| format!("expected X,Y, got {s:?}"))?;
    let num = |v: &str| v.trim().parse::<f64>().map_err(|e| format!("{v:?}: {e}"));
    Ok([num(a)?, num(b)?])
}
