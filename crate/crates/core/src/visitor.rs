//! Simulated museum visitor and the static tour policy.
//!
//! A visitor carries a latent engagement in `[0, 1]` that moves with every
//! action: novelty lifts it the first time an action type is seen, walking
//! and talking wear it down, each exhibit pulls it toward the visitor's
//! affinity for that exhibit, and extra detail helps engaged, tolerant
//! visitors while boring the rest. The robot observes ~1 Hz noisy samples
//! around the latent value.
//!
//! After the tour description (stop 0) and after each exhibit description
//! (stop `k`), the visitor decides whether to carry on. The continuation
//! probability is read from a hazard table keyed by stop index and the
//! engagement level the robot just observed.

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::domain::{ActionId, EngagementLevel, TerminalFlag, TourName, TourState, MAX_EXHIBITS};
use crate::engagement::{aggregate, EngagementSample};
use crate::learner::{Controller, Environment, EnvironmentError, LearnerError, StepResponse};

/// Stop indices 0 (tour description) through 6.
pub const STOP_SLOTS: usize = MAX_EXHIBITS + 1;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum VisitorError {
    #[error("invalid visitor configuration: {0}")]
    InvalidConfig(String),
}

/// Closed interval sampled uniformly. Serialised as `[lo, hi]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(from = "[f64; 2]", into = "[f64; 2]")]
pub struct Span {
    pub lo: f64,
    pub hi: f64,
}

impl Span {
    pub const fn new(lo: f64, hi: f64) -> Span {
        Span { lo, hi }
    }

    pub const fn point(x: f64) -> Span {
        Span { lo: x, hi: x }
    }

    fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        if self.lo == self.hi {
            self.lo
        } else {
            rng.random_range(self.lo..=self.hi)
        }
    }

    fn check(&self, name: &str, min: f64, max: f64) -> Result<(), VisitorError> {
        if !(self.lo.is_finite() && self.hi.is_finite()) || self.lo > self.hi || self.lo < min || self.hi > max {
            return Err(VisitorError::InvalidConfig(format!(
                "{name} range [{}, {}] must be ordered within [{min}, {max}]",
                self.lo, self.hi
            )));
        }
        Ok(())
    }
}

impl From<[f64; 2]> for Span {
    fn from([lo, hi]: [f64; 2]) -> Self {
        Span { lo, hi }
    }
}

impl From<Span> for [f64; 2] {
    fn from(s: Span) -> Self {
        [s.lo, s.hi]
    }
}

/// Probability of continuing the tour, by stop index and observed level.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct HazardTable(pub [[f64; 3]; STOP_SLOTS]);

impl HazardTable {
    pub fn continuation(&self, stop: usize, level: EngagementLevel) -> f64 {
        self.0[stop.min(STOP_SLOTS - 1)][level.index()]
    }

    pub fn validate(&self) -> Result<(), VisitorError> {
        for (stop, row) in self.0.iter().enumerate() {
            if row.iter().any(|p| !(0.0..=1.0).contains(p)) {
                return Err(VisitorError::InvalidConfig(format!("hazard row {stop} has a value outside [0, 1]")));
            }
            if row[0] > row[1] || row[1] > row[2] {
                return Err(VisitorError::InvalidConfig(format!(
                    "hazard row {stop} must not decrease with engagement"
                )));
            }
        }
        Ok(())
    }
}

/// Nominal action durations in seconds; one engagement sample per second.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Durations {
    pub describe_tour: f64,
    pub goto_exhibit: f64,
    pub describe_exhibit: f64,
    pub describe_more: f64,
    pub end_tour: f64,
}

impl Default for Durations {
    fn default() -> Self {
        Durations {
            describe_tour: 30.0,
            goto_exhibit: 45.0,
            describe_exhibit: 40.0,
            describe_more: 40.0,
            end_tour: 10.0,
        }
    }
}

impl Durations {
    pub fn of(&self, action: ActionId) -> f64 {
        match action {
            ActionId::DO_NOTHING => 0.0,
            ActionId::DESCRIBE_TOUR => self.describe_tour,
            ActionId::DESCRIBE_EXHIBIT => self.describe_exhibit,
            ActionId::DESCRIBE_MORE_EXHIBIT => self.describe_more,
            ActionId::END_TOUR => self.end_tour,
            _ => self.goto_exhibit,
        }
    }
}

/// Population distribution that visitor profiles are drawn from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VisitorConfig {
    pub base_engagement: Span,
    pub novelty_bonus: Span,
    pub fatigue_rate: Span,
    pub verbosity_tolerance: Span,
    /// Standard deviation of the per-sample observation noise.
    pub noise: Span,
    /// Population mean affinity per exhibit slot.
    pub preference_mean: [f64; MAX_EXHIBITS],
    /// Half-width of the uniform spread of individual affinities.
    pub preference_spread: f64,
    /// Fraction of the gap to the exhibit affinity closed by one description.
    pub appeal_rate: f64,
    /// Engagement change per unit of `latent + tolerance - 1` on extra detail.
    pub verbosity_gain: f64,
    pub hazard: HazardTable,
    pub durations: Durations,
    /// Relative frequency with which visitors pick each tour
    /// (death, tools, religion, art).
    pub tour_weights: [f64; 4],
}

impl Default for VisitorConfig {
    fn default() -> Self {
        VisitorConfig {
            base_engagement: Span::new(0.35, 0.75),
            novelty_bonus: Span::new(0.0, 0.1),
            fatigue_rate: Span::new(0.01, 0.03),
            verbosity_tolerance: Span::new(0.0, 0.6),
            noise: Span::new(0.1, 0.2),
            preference_mean: [0.15, 0.30, 0.50, 0.80, 0.90, 0.70],
            preference_spread: 0.2,
            appeal_rate: 0.6,
            verbosity_gain: 0.3,
            hazard: HazardTable([
                [0.80, 0.85, 0.90],
                [0.42, 0.61, 0.95],
                [0.45, 0.75, 0.95],
                [0.72, 0.88, 0.96],
                [0.80, 0.92, 0.97],
                [0.85, 0.94, 0.97],
                [0.88, 0.95, 0.98],
            ]),
            durations: Durations::default(),
            tour_weights: [1.0; 4],
        }
    }
}

impl VisitorConfig {
    pub fn validate(&self) -> Result<(), VisitorError> {
        self.base_engagement.check("base_engagement", 0.0, 1.0)?;
        self.novelty_bonus.check("novelty_bonus", -1.0, 1.0)?;
        self.fatigue_rate.check("fatigue_rate", -1.0, 1.0)?;
        self.verbosity_tolerance.check("verbosity_tolerance", 0.0, 1.0)?;
        self.noise.check("noise", 0.0, f64::MAX)?;
        if self.preference_mean.iter().any(|p| !(0.0..=1.0).contains(p)) {
            return Err(VisitorError::InvalidConfig("preference_mean entries must lie in [0, 1]".into()));
        }
        if !(0.0..=1.0).contains(&self.preference_spread) {
            return Err(VisitorError::InvalidConfig("preference_spread must lie in [0, 1]".into()));
        }
        if !(0.0..=1.0).contains(&self.appeal_rate) {
            return Err(VisitorError::InvalidConfig("appeal_rate must lie in [0, 1]".into()));
        }
        if !self.verbosity_gain.is_finite() {
            return Err(VisitorError::InvalidConfig("verbosity_gain must be finite".into()));
        }
        self.hazard.validate()?;
        let d = &self.durations;
        if [d.describe_tour, d.goto_exhibit, d.describe_exhibit, d.describe_more, d.end_tour]
            .iter()
            .any(|x| !(x.is_finite() && *x >= 0.0))
        {
            return Err(VisitorError::InvalidConfig("durations must be non-negative".into()));
        }
        if self.tour_weights.iter().any(|w| !(w.is_finite() && *w >= 0.0))
            || self.tour_weights.iter().sum::<f64>() <= 0.0
        {
            return Err(VisitorError::InvalidConfig("tour_weights must be non-negative and not all zero".into()));
        }
        Ok(())
    }

    /// Pick the tour a visitor asks for.
    pub fn sample_tour<R: Rng + ?Sized>(&self, rng: &mut R) -> TourName {
        let total: f64 = self.tour_weights.iter().sum();
        let mut x = rng.random_range(0.0..total);
        for (i, w) in self.tour_weights.iter().enumerate() {
            if x < *w {
                return TourName::ALL[i];
            }
            x -= w;
        }
        TourName::ALL[self.tour_weights.iter().rposition(|w| *w > 0.0).unwrap()]
    }
}

/// One concrete visitor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VisitorProfile {
    pub base_engagement: f64,
    pub novelty_bonus: f64,
    pub fatigue_rate: f64,
    pub preference: [f64; MAX_EXHIBITS],
    pub verbosity_tolerance: f64,
    pub noise: f64,
    pub appeal_rate: f64,
    pub verbosity_gain: f64,
    pub hazard_table: HazardTable,
    pub durations: Durations,
}

/// Draw a visitor from the population.
pub fn sample_visitor<R: Rng + ?Sized>(config: &VisitorConfig, rng: &mut R) -> Result<VisitorProfile, VisitorError> {
    config.validate()?;
    let base_engagement = config.base_engagement.sample(rng);
    let novelty_bonus = config.novelty_bonus.sample(rng);
    let fatigue_rate = config.fatigue_rate.sample(rng);
    let verbosity_tolerance = config.verbosity_tolerance.sample(rng);
    let noise = config.noise.sample(rng);
    let mut preference = config.preference_mean;
    for p in &mut preference {
        let spread = Span::new(-config.preference_spread, config.preference_spread).sample(rng);
        *p = (*p + spread).clamp(0.0, 1.0);
    }
    Ok(VisitorProfile {
        base_engagement,
        novelty_bonus,
        fatigue_rate,
        preference,
        verbosity_tolerance,
        noise,
        appeal_rate: config.appeal_rate,
        verbosity_gain: config.verbosity_gain,
        hazard_table: config.hazard,
        durations: config.durations,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VisitorState {
    pub latent_engagement: f64,
    pub steps_taken: usize,
    pub stops_completed: usize,
    /// Action categories already experienced, as a bitmask.
    pub seen: u8,
}

impl VisitorState {
    pub fn new(profile: &VisitorProfile) -> VisitorState {
        VisitorState {
            latent_engagement: profile.base_engagement.clamp(0.0, 1.0),
            steps_taken: 0,
            stops_completed: 0,
            seen: 0,
        }
    }
}

fn category(action: ActionId) -> u8 {
    match action {
        ActionId::DO_NOTHING => 0,
        ActionId::DESCRIBE_TOUR => 1,
        ActionId::DESCRIBE_EXHIBIT => 3,
        ActionId::DESCRIBE_MORE_EXHIBIT => 4,
        ActionId::END_TOUR => 5,
        _ => 2,
    }
}

/// The visitor's reaction to one action: the engagement stream the robot
/// sees, whether the tour ends, and the updated visitor.
pub fn step<R: Rng + ?Sized>(
    visitor: &VisitorState,
    profile: &VisitorProfile,
    action: ActionId,
    context: &TourState,
    rng: &mut R,
) -> (Vec<EngagementSample>, TerminalFlag, VisitorState) {
    let mut next = *visitor;
    let cat = category(action);
    let novel = next.seen & (1 << cat) == 0;
    next.seen |= 1 << cat;
    let novelty = if novel { profile.novelty_bonus } else { 0.0 };
    let latent = visitor.latent_engagement;

    let updated = match action {
        ActionId::DO_NOTHING | ActionId::END_TOUR => latent,
        ActionId::DESCRIBE_TOUR => latent + novelty,
        ActionId::DESCRIBE_EXHIBIT => {
            let affinity = context.pending_exhibit().map_or(latent, |k| profile.preference[k - 1]);
            latent + profile.appeal_rate * (affinity - latent) + novelty - profile.fatigue_rate
        }
        ActionId::DESCRIBE_MORE_EXHIBIT => {
            latent + profile.verbosity_gain * (latent + profile.verbosity_tolerance - 1.0) - profile.fatigue_rate
        }
        _ => latent + novelty - profile.fatigue_rate,
    };
    next.latent_engagement = updated.clamp(0.0, 1.0);
    next.steps_taken += 1;

    let count = profile.durations.of(action).round() as usize;
    let samples: Vec<EngagementSample> = if profile.noise > 0.0 {
        let normal = Normal::new(0.0, profile.noise).expect("noise is finite and positive");
        (0..count)
            .map(|t| EngagementSample::new(t as f64, (next.latent_engagement + normal.sample(rng)).clamp(0.0, 1.0)))
            .collect()
    } else {
        (0..count).map(|t| EngagementSample::new(t as f64, next.latent_engagement)).collect()
    };

    let stop = match action {
        ActionId::DESCRIBE_TOUR => Some(0),
        ActionId::DESCRIBE_EXHIBIT => {
            next.stops_completed += 1;
            Some(next.stops_completed)
        }
        _ => None,
    };
    let termination = if action == ActionId::END_TOUR {
        TerminalFlag::Ended
    } else if let Some(stop) = stop {
        let level = aggregate(&samples).level;
        let carry_on = profile.hazard_table.continuation(stop, level);
        if rng.random::<f64>() < carry_on {
            TerminalFlag::None
        } else if rng.random::<f64>() < next.latent_engagement {
            TerminalFlag::Stopped
        } else {
            TerminalFlag::Abandoned
        }
    } else {
        TerminalFlag::None
    };
    (samples, termination, next)
}

/// A visitor taking one tour, driven by its own random stream.
#[derive(Debug, Clone)]
pub struct VisitorSession<R> {
    pub profile: VisitorProfile,
    pub state: VisitorState,
    rng: R,
}

impl<R: Rng> VisitorSession<R> {
    pub fn new(profile: VisitorProfile, rng: R) -> Self {
        let state = VisitorState::new(&profile);
        VisitorSession { profile, state, rng }
    }
}

impl<R: Rng> Environment for VisitorSession<R> {
    fn respond(&mut self, state: &TourState, action: ActionId) -> Result<StepResponse, EnvironmentError> {
        let (samples, termination, next) = step(&self.state, &self.profile, action, state, &mut self.rng);
        self.state = next;
        Ok(StepResponse { samples, termination })
    }
}

pub const DEFAULT_REQUEST_PROBABILITY: f64 = 0.5;

/// Next action of the static tour: exhibits in fixed order, extra detail only
/// when the visitor asked for it.
pub fn static_policy(state: &TourState, detail_requested: bool) -> Result<ActionId, LearnerError> {
    if state.is_terminal() {
        return Err(LearnerError::TerminalState(*state));
    }
    let next_stop =
        || (1..=state.tour.exhibit_count()).find(|&k| !state.is_visited(k)).map_or(ActionId::END_TOUR, ActionId::goto);
    let action = match state.prev_action {
        ActionId::DO_NOTHING => ActionId::DESCRIBE_TOUR,
        ActionId::DESCRIBE_TOUR | ActionId::DESCRIBE_MORE_EXHIBIT => next_stop(),
        ActionId::DESCRIBE_EXHIBIT if detail_requested => ActionId::DESCRIBE_MORE_EXHIBIT,
        ActionId::DESCRIBE_EXHIBIT => next_stop(),
        ActionId::END_TOUR => ActionId::DO_NOTHING,
        _ => ActionId::DESCRIBE_EXHIBIT,
    };
    if state.feasible_actions().contains(action) {
        Ok(action)
    } else {
        Err(LearnerError::NoFeasibleAction(*state))
    }
}

/// [`static_policy`] with the visitor's request for more detail rolled from
/// its own random stream.
#[derive(Debug, Clone)]
pub struct StaticController<R> {
    pub request_probability: f64,
    rng: R,
}

impl<R: Rng> StaticController<R> {
    pub fn new(request_probability: f64, rng: R) -> Self {
        StaticController { request_probability, rng }
    }
}

impl<R: Rng> Controller for StaticController<R> {
    fn choose(&mut self, state: &TourState, _h: usize) -> Result<ActionId, LearnerError> {
        let requested = state.prev_action == ActionId::DESCRIBE_EXHIBIT
            && !state.is_terminal()
            && self.rng.random::<f64>() < self.request_probability;
        static_policy(state, requested)
    }
}
