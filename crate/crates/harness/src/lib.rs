//! Experiment harness: synthetic workloads, the replay loop and metrics.

pub mod config;
pub mod metrics;
pub mod runner;
pub mod workload;

pub use config::{BbdrMode, RetrainPolicy, RunConfig};
pub use runner::{run, IterationReport, RunResult};
pub use workload::{ScenarioKind, ScenarioSpec};

#[derive(Debug, thiserror::Error)]
pub enum HarnessError {
    #[error(transparent)]
    Config(#[from] config::ConfigError),
    #[error("io: {0}")]
    Io(String),
    #[error(transparent)]
    Core(#[from] memento::Error),
    #[error(transparent)]
    Workload(#[from] workload::WorkloadError),
    #[error(transparent)]
    Metric(#[from] metrics::MetricError),
}

impl From<std::io::Error> for HarnessError {
    fn from(e: std::io::Error) -> Self {
        HarnessError::Io(e.to_string())
    }
}
