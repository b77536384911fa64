//! Experiment orchestration: campaigns against the simulated visitor,
//! episode logs, model snapshots, metrics, exploration coverage and export.

mod campaign;
mod config;
mod coverage;
mod export;
mod log;
mod metrics;

pub use campaign::{run_campaign, write_coverage, write_static_log, CampaignOutcome, ReplicationOutcome};
pub use config::{ExperimentConfig, Mode};
pub use coverage::{exploration_coverage, simulate_future_exploration, CoverageWindow, ReachableSet};
pub use export::{export, import, ExportFormat, FAMILIES};
pub use log::{
    bootstrap, bootstrap_from, export_policy, read_episodes, read_snapshot, write_snapshot, EpisodeLogWriter, LogHeader,
};
pub use metrics::{compute_metrics, DeltaCounts, MetricsReport, Tally, WindowExploration, WindowMetrics};

use std::io;
use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::learner::LearnerError;
use crate::visitor::VisitorError;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: io::Error },
    #[error("{}:{line}: {message}", path.display())]
    Parse { path: PathBuf, line: usize, message: String },
    #[error("episode {episode} is malformed: {reason}")]
    MalformedEpisode { episode: u64, reason: String },
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Learner(LearnerError),
}

impl From<LearnerError> for HarnessError {
    fn from(e: LearnerError) -> Self {
        match e {
            LearnerError::MalformedEpisode { episode, reason } => HarnessError::MalformedEpisode { episode, reason },
            LearnerError::InvalidConfig(msg) => HarnessError::Config(msg),
            other => HarnessError::Learner(other),
        }
    }
}

impl From<VisitorError> for HarnessError {
    fn from(e: VisitorError) -> Self {
        HarnessError::Config(e.to_string())
    }
}

pub(crate) fn io_error(path: &Path) -> impl FnOnce(io::Error) -> HarnessError + '_ {
    move |source| HarnessError::Io { path: path.to_path_buf(), source }
}
