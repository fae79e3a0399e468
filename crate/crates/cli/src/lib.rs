//! Operator commands. Every command writes its machine-readable output
//! before printing any human-readable summary.

mod batches;
mod commands;
pub mod plot;

use std::path::PathBuf;

use clap::{Parser, Subcommand};

pub use batches::{read_groups, RolloutGroup};
pub use commands::run;

/// Exit status 2.
pub const EXIT_INPUT: u8 = 2;
/// Exit status 3.
pub const EXIT_INTERNAL: u8 = 3;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    /// Bad flags, config, or input files.
    #[error("{0:#}")]
    Input(anyhow::Error),
    /// A computation broke one of its own guarantees.
    #[error("internal invariant violated: {0:#}")]
    Internal(anyhow::Error),
}

impl CliError {
    pub fn code(&self) -> u8 {
        match self {
            CliError::Input(_) => EXIT_INPUT,
            CliError::Internal(_) => EXIT_INTERNAL,
        }
    }

    pub fn source(&self) -> &anyhow::Error {
        match self {
            CliError::Input(e) | CliError::Internal(e) => e,
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "cotagree", version, about = "Intrinsic CoT-agreement rewards: scoring, simulation, diagnostics")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Score rollout groups from a JSONL file.
    Score {
        /// JSONL with one `{"id", "question", "text"}` record per line.
        #[arg(long)]
        input: PathBuf,
        #[arg(long, env = "COTAGREE_CONFIG")]
        config: Option<PathBuf>,
        /// Training step for the mixing schedule; lambda_max when absent.
        #[arg(long)]
        step: Option<u64>,
        /// Defaults to stdout.
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Run the self-play simulator and write per-iteration metrics.
    Simulate {
        #[arg(long, env = "COTAGREE_CONFIG")]
        config: Option<PathBuf>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Overrides `simulator.steps`.
        #[arg(long)]
        steps: Option<u64>,
        #[arg(long)]
        metrics: PathBuf,
        /// Directory for SVG charts of the run.
        #[arg(long)]
        plots: Option<PathBuf>,
    },
    /// Leave-one-out step agreement of each rollout group.
    Diagnose {
        #[arg(long)]
        input: PathBuf,
        #[arg(long, env = "COTAGREE_CONFIG")]
        config: Option<PathBuf>,
        /// Defaults to stdout.
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Serve the scoring API until interrupted.
    Serve {
        #[arg(long, env = "COTAGREE_ADDR", default_value = cotagree_service::DEFAULT_ADDR)]
        addr: String,
        #[arg(long, env = "COTAGREE_CONFIG")]
        config: Option<PathBuf>,
    },
    /// Render SVG charts from a metrics file or a diagnostics file.
    Plot {
        #[arg(long, required_unless_present = "diagnostics")]
        metrics: Option<PathBuf>,
        #[arg(long)]
        diagnostics: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
}
