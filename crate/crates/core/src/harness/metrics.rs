use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

use super::CoverageWindow;
use crate::domain::{ActionId, EngagementLevel, MAX_EXHIBITS};
use crate::engagement::aggregate;
use crate::learner::EpisodeTranscript;
use crate::visitor::STOP_SLOTS;

/// `hits` out of `trials`.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Tally {
    pub trials: u64,
    pub hits: u64,
}

impl Tally {
    pub fn rate(&self) -> Option<f64> {
        (self.trials > 0).then(|| self.hits as f64 / self.trials as f64)
    }

    fn add(&mut self, hit: bool) {
        self.trials += 1;
        self.hits += u64::from(hit);
    }
}

/// Level changes between consecutive actions of the same tour.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct DeltaCounts {
    pub increased: u64,
    pub stable: u64,
    pub decreased: u64,
}

impl DeltaCounts {
    pub fn total(&self) -> u64 {
        self.increased + self.stable + self.decreased
    }

    /// `[increased, stable, decreased]` as fractions of the total.
    pub fn fractions(&self) -> Option<[f64; 3]> {
        let n = self.total();
        (n > 0).then(|| [self.increased, self.stable, self.decreased].map(|c| c as f64 / n as f64))
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct WindowExploration {
    pub new_pairs: u64,
    pub cumulative_pairs: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WindowMetrics {
    /// 0-based window index.
    pub window: usize,
    pub tours: usize,
    pub mean_stops: f64,
    pub completion_rate: f64,
    /// Mean of the per-action sample means; `None` if nothing was observed.
    pub mean_engagement: Option<f64>,
    pub deltas: DeltaCounts,
    /// Filled in from model snapshots; episodes alone cannot tell.
    pub exploration: Option<WindowExploration>,
    /// Indexed `[stop][level]`: tours that reached the end of stop `k`
    /// (0 is the tour description) with that engagement, and how many
    /// carried on.
    pub continuation: [[Tally; 3]; STOP_SLOTS],
    /// Indexed `[stop - 1][level]`: chances to give extra detail after
    /// describing the `stop`-th exhibit, and how often it was given.
    pub describe_more: [[Tally; 3]; MAX_EXHIBITS],
}

impl WindowMetrics {
    pub fn continuation_rate(&self, stop: usize, level: EngagementLevel) -> Option<f64> {
        self.continuation[stop][level.index()].rate()
    }

    pub fn describe_more_rate(&self, stop: usize, level: EngagementLevel) -> Option<f64> {
        self.describe_more[stop - 1][level.index()].rate()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub window_size: usize,
    pub windows: Vec<WindowMetrics>,
}

impl MetricsReport {
    pub fn empty(window_size: usize) -> Self {
        MetricsReport { window_size, windows: Vec::new() }
    }

    /// Copy per-window exploration counts from a coverage series of the same
    /// length.
    pub fn attach_exploration(&mut self, coverage: &[CoverageWindow]) {
        for (w, c) in self.windows.iter_mut().zip(coverage) {
            w.exploration = Some(WindowExploration { new_pairs: c.new_pairs, cumulative_pairs: c.cumulative_pairs });
        }
    }
}

/// Aggregate consecutive runs of `window` episodes; a trailing partial window
/// is kept. Results do not depend on the order of episodes inside a window.
pub fn compute_metrics(episodes: &[EpisodeTranscript], window: usize) -> MetricsReport {
    assert!(window >= 1, "window must be positive");
    let windows = episodes.chunks(window).enumerate().map(|(i, chunk)| window_metrics(i, chunk)).collect();
    MetricsReport { window_size: window, windows }
}

fn window_metrics(index: usize, episodes: &[EpisodeTranscript]) -> WindowMetrics {
    let tours = episodes.len();
    let stops: usize = episodes.iter().map(|e| e.stops()).sum();
    let completed = episodes.iter().filter(|e| e.completed()).count();
    let mut means = Vec::new();
    let mut deltas = DeltaCounts::default();
    let mut continuation = [[Tally::default(); 3]; STOP_SLOTS];
    let mut describe_more = [[Tally::default(); 3]; MAX_EXHIBITS];

    for episode in episodes {
        for (i, step) in episode.steps.iter().enumerate() {
            if let Some(m) = aggregate(&step.samples).mean {
                means.push(m);
            }
            if i > 0 {
                match step.level().cmp(&episode.steps[i - 1].level()) {
                    Ordering::Greater => deltas.increased += 1,
                    Ordering::Equal => deltas.stable += 1,
                    Ordering::Less => deltas.decreased += 1,
                }
            }
            let stop = match step.action {
                ActionId::DESCRIBE_TOUR => Some(0),
                ActionId::DESCRIBE_EXHIBIT => Some(step.next_state.visited_count()),
                _ => None,
            };
            if let Some(stop) = stop {
                continuation[stop][step.level().index()].add(!step.next_state.is_terminal());
            }
            if step.state.prev_action == ActionId::DESCRIBE_EXHIBIT {
                let stop = step.state.visited_count();
                describe_more[stop - 1][step.state.engagement.index()]
                    .add(step.action == ActionId::DESCRIBE_MORE_EXHIBIT);
            }
        }
    }

    means.sort_by(f64::total_cmp);
    let mean_engagement = (!means.is_empty()).then(|| means.iter().sum::<f64>() / means.len() as f64);
    WindowMetrics {
        window: index,
        tours,
        mean_stops: stops as f64 / tours as f64,
        completion_rate: completed as f64 / tours as f64,
        mean_engagement,
        deltas,
        exploration: None,
        continuation,
        describe_more,
    }
}
