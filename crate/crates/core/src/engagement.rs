//! Engagement streams to discrete levels and rewards.
//!
//! The mean of the per-action samples is binned into thirds of `[0, 1]`
//! (`LOW` = `(0, 1/3]`, `MEDIUM` = `(1/3, 2/3]`, `HIGH` = `(2/3, 1]`) and the
//! executed reward is drawn uniformly from the open interval of that bin.
//! Planning uses the bin midpoint instead of a fresh draw.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::domain::EngagementLevel;

const THIRD: f64 = 1.0 / 3.0;
const TWO_THIRDS: f64 = 2.0 / 3.0;

/// A single engagement reading. Serialised as a `[timestamp, value]` pair.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(from = "(f64, f64)", into = "(f64, f64)")]
pub struct EngagementSample {
    /// Seconds since the action started.
    pub timestamp: f64,
    pub value: f64,
}

impl EngagementSample {
    pub fn new(timestamp: f64, value: f64) -> Self {
        EngagementSample { timestamp, value }
    }
}

impl From<(f64, f64)> for EngagementSample {
    fn from((timestamp, value): (f64, f64)) -> Self {
        EngagementSample { timestamp, value }
    }
}

impl From<EngagementSample> for (f64, f64) {
    fn from(s: EngagementSample) -> Self {
        (s.timestamp, s.value)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EngagementSummary {
    /// `None` when no samples were collected.
    pub mean: Option<f64>,
    pub level: EngagementLevel,
    pub sample_count: usize,
}

/// Bin of a scalar engagement value. Zero falls in `Low`.
pub fn level_of(value: f64) -> EngagementLevel {
    if value <= THIRD {
        EngagementLevel::Low
    } else if value <= TWO_THIRDS {
        EngagementLevel::Medium
    } else {
        EngagementLevel::High
    }
}

/// Average the samples of one action and bin the result. An empty stream
/// (nobody in view) reads as `Low`.
pub fn aggregate(samples: &[EngagementSample]) -> EngagementSummary {
    if samples.is_empty() {
        return EngagementSummary { mean: None, level: EngagementLevel::Low, sample_count: 0 };
    }
    let mean = samples.iter().map(|s| s.value).sum::<f64>() / samples.len() as f64;
    EngagementSummary { mean: Some(mean), level: level_of(mean), sample_count: samples.len() }
}

/// Open interval `(low, high)` of rewards for a level.
pub fn reward_bounds(level: EngagementLevel) -> (f64, f64) {
    match level {
        EngagementLevel::Low => (0.0, THIRD),
        EngagementLevel::Medium => (THIRD, TWO_THIRDS),
        EngagementLevel::High => (TWO_THIRDS, 1.0),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Reward(f64);

impl Reward {
    pub fn value(self) -> f64 {
        self.0
    }
}

/// Draw the reward of an executed action, uniform on the open bin interval.
pub fn sample_reward<R: Rng + ?Sized>(level: EngagementLevel, rng: &mut R) -> Reward {
    let (lo, hi) = reward_bounds(level);
    loop {
        // gen_range is half-open on the right; reject the left endpoint too.
        let x = rng.random_range(lo..hi);
        if x > lo {
            return Reward(x);
        }
    }
}

/// Expected value of [`sample_reward`]: the bin midpoint.
pub fn planning_reward(level: EngagementLevel) -> f64 {
    match level {
        EngagementLevel::Low => 1.0 / 6.0,
        EngagementLevel::Medium => 0.5,
        EngagementLevel::High => 5.0 / 6.0,
    }
}
