//! UCBVI: count-based transition model, exploration bonus, bonus-augmented
//! value iteration and the episode loop around them.

mod episode;
mod model;
mod planner;
mod tabular;

pub use episode::{
    run_episode, update_model, Controller, Environment, EnvironmentError, EpisodeTranscript, Step, StepResponse,
};
pub use model::{PairCounts, TabularModel};
pub use planner::{
    bonus, plan, plan_into, select_action, BackupSet, BonusConfig, PlannerConfig, StagePolicy, DEFAULT_SIGMA,
};
pub use tabular::{ExplicitMdp, TabularDomain, TourDomain};

use thiserror::Error;

use crate::domain::{DomainError, TourState};

/// Episode length covering the longest legal tour: describeTour, six
/// exhibits with goto/describe/describe-more each, endTour.
pub const DEFAULT_HORIZON: usize = 20;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LearnerError {
    #[error("step {step} outside horizon 1..={horizon}")]
    HorizonExceeded { step: usize, horizon: usize },
    #[error("transition (h={step}, s={state}, a={action}, s'={next}) outside the model")]
    OutOfRange { step: usize, state: usize, action: usize, next: usize },
    #[error("state {0} is terminal")]
    TerminalState(TourState),
    #[error("no feasible action in state {0}")]
    NoFeasibleAction(TourState),
    #[error("episode {episode} is malformed: {reason}")]
    MalformedEpisode { episode: u64, reason: String },
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Domain(#[from] DomainError),
}
