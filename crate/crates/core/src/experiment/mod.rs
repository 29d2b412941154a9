//! Seeded experiment runner on tracking instances.
//!
//! A run generates the instance and the graph sequence from the config, runs
//! the algorithm, measures regret and violation at checkpoints and writes:
//!
//! * `config.toml`: the resolved config
//! * `instance.trace`: the instance data
//! * `graphs.txt`: the edge sets of every round
//! * `rounds.csv`: one row per round and agent with step sizes, decision and dual
//! * `series.csv`: per-round objective, comparator objective, constraint sums
//!   and cumulative metrics
//! * `metrics.csv`: metrics and bounds at the checkpoints
//! * `summary.toml`: config, constants and audit results
//!
//! Everything is a function of the config, so repeated runs are byte-identical.

mod config;
mod replay;
mod run;
mod sweep;

use std::path::{Path, PathBuf};

use thiserror::Error;

pub use config::{
    AlgorithmConfig, ComparatorChoice, ExperimentConfig, GeometryConfig, GeometryKind,
    InstanceConfig, MappingKind, NetworkConfig, OnViolation, OutputConfig, ScheduleKind,
    SweepConfig, SweepParam,
};
pub use replay::{replay, rounds_csv, ReplayMismatch, ReplayReport};
pub use run::{
    check_graph, execute, run_experiment, simulate, write_outputs, ComparatorSummary,
    MetricsRow, RunResult, RunSummary, Simulation, Summary,
};
pub use sweep::{sweep, SweepPoint, SweepReport};

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error("invalid config: {0}")]
    Config(String),
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{context}: {source}")]
    Engine {
        context: String,
        source: crate::Error,
    },
    #[error("replay failed: {0}")]
    Replay(String),
    #[error("graph check failed: {0}")]
    Graph(String),
}

impl ExperimentError {
    pub(crate) fn io(path: &Path, source: std::io::Error) -> Self {
        ExperimentError::Io {
            path: path.to_path_buf(),
            source,
        }
    }

    pub(crate) fn engine(context: impl Into<String>) -> impl FnOnce(crate::Error) -> Self {
        let context = context.into();
        move |source| ExperimentError::Engine { context, source }
    }

    /// Process exit code of the command line tool.
    pub fn exit_code(&self) -> i32 {
        match self {
            ExperimentError::Config(_) => 2,
            ExperimentError::Io { .. } => 3,
            ExperimentError::Engine { .. } => 4,
            ExperimentError::Replay(_) => 5,
            ExperimentError::Graph(_) => 6,
        }
    }
}
