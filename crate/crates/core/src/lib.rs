//! Engagement-driven behaviour adaptation for a museum tour-guide robot.
//!
//! A UCBVI learner plans the robot's actions over a constrained tabular MDP,
//! learns online from (simulated) visitor engagement and is evaluated with
//! tour-success and exploration metrics.
//!
//! - [`domain`]: states, actions and successor constraints.
//! - [`engagement`]: engagement streams to levels and rewards.
//! - [`learner`]: transition counts, bonus, value iteration, episodes.
//! - [`visitor`]: a parametric simulated visitor and the static baseline policy.
//! - [`harness`]: campaigns, logs, metrics, coverage and export.

pub mod domain;
pub mod engagement;
pub mod harness;
pub mod learner;
pub mod rng;
pub mod visitor;
