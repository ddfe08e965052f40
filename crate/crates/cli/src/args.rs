//! Command-line interface definition.

use std::path::PathBuf;

use clap::{Parser, Subcommand};

use crate::settings::{Experiment, Overrides};

#[derive(Debug, Parser)]
#[command(
    name = "flowlab",
    version,
    about = "Reproducible experiments on flows of rough vector fields"
)]
pub struct Cli {
    /// Experiment config file (`key = value` with `[section]` headers).
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,

    /// RNG seed; overrides `seed` in the config. Required unless the config sets one.
    #[arg(long, global = true)]
    pub seed: Option<u64>,

    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    pub out: PathBuf,

    /// Also write SVG figures.
    #[arg(long, global = true)]
    pub plots: bool,

    /// Worker threads (default: one per core). Does not change results.
    #[arg(long, global = true)]
    pub workers: Option<usize>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, Subcommand)]
pub enum Command {
    /// Commutator defect statistics of a pair over a grid of times.
    Defect,
    /// Residual ladders A, B, R and their log-log slopes.
    Ladder,
    /// Push-forward density sup ratios.
    Compress,
    /// Sharp maximal function decay and the pointwise sandwich.
    Maximal,
    /// Pointwise Sobolev inequality audit.
    Sobolev,
    /// Concentration residual against its omega bound.
    Concentrate,
    /// Logarithmic stability bound audit.
    Stability,
    /// List builtin and configured pairs and fields.
    Catalog,
    /// Lie bracket, divergence and Jacobian checks on samples.
    Bracket,
    /// One integral curve with the chain-rule and escape-time checks.
    Trajectory,
}

impl Command {
    pub fn experiment(self) -> Experiment {
        match self {
            Self::Defect => Experiment::Defect,
            Self::Ladder => Experiment::Ladder,
            Self::Compress => Experiment::Compress,
            Self::Maximal => Experiment::Maximal,
            Self::Sobolev => Experiment::Sobolev,
            Self::Concentrate => Experiment::Concentrate,
            Self::Stability => Experiment::Stability,
            Self::Catalog => Experiment::Catalog,
            Self::Bracket => Experiment::Bracket,
            Self::Trajectory => Experiment::Trajectory,
        }
    }
}

impl Cli {
    pub fn overrides(&self) -> Overrides {
        Overrides {
            seed: self.seed,
            workers: self.workers,
            out: Some(self.out.clone()),
            plots: self.plots,
        }
    }
}
