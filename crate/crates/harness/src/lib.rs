//! Orchestration for the `kmtc` command line: configuration, seeded Monte
//! Carlo sweeps, rate fits, probe runs and report files.
//!
//! Every command takes a resolved [`RunConfig`] and a thread pool, and
//! writes its files under `config.out`. Outputs never depend on the pool
//! size: replicates use their own RNG streams and are merged by index.

pub mod commands;
pub mod config;
pub mod output;
pub mod sweep;

use std::io;

use thiserror::Error;

pub use commands::{
    cmd_check, cmd_compose, cmd_couple, cmd_decompose, cmd_mc, cmd_rate, shipped_families, CheckOutcome,
    DecomposeOutput, RateFit,
};
pub use config::{CheckConfig, RunConfig};
pub use sweep::{run_sweep, MomentEstimate, Sweep, SweepRow, TailFit, LAMBDAS, TAIL_FRACTION};

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("{0}")]
    Config(String),
    #[error(transparent)]
    Core(#[from] kmtc_core::Error),
    #[error("{context}: {source}")]
    Io { context: String, source: io::Error },
    #[error("csv output: {0}")]
    Csv(#[from] csv::Error),
    #[error("{0}")]
    ProbeFailed(String),
}

impl HarnessError {
    pub fn io(context: impl Into<String>, source: io::Error) -> Self {
        Self::Io { context: context.into(), source }
    }

    /// 1 for invalid input or a failed probe, 2 for numeric and I/O failures.
    pub fn exit_code(&self) -> i32 {
        use kmtc_core::Error as E;
        match self {
            Self::Config(_) | Self::ProbeFailed(_) => 1,
            Self::Core(E::Config(_) | E::Domain(_) | E::FamilySpec(_) | E::Insufficient(_)) => 1,
            Self::Core(_) | Self::Io { .. } | Self::Csv(_) => 2,
        }
    }
}

pub type Result<T> = std::result::Result<T, HarnessError>;

/// A rayon pool capped at `jobs` threads (all cores when `None`).
pub fn thread_pool(jobs: Option<usize>) -> Result<rayon::ThreadPool> {
    let mut b = rayon::ThreadPoolBuilder::new();
    if let Some(j) = jobs {
        if j == 0 {
            return Err(HarnessError::Config("jobs must be at least 1".into()));
        }
        b = b.num_threads(j);
    }
    b.build().map_err(|e| HarnessError::Config(format!("thread pool: {e}")))
}
