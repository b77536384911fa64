use std::collections::BTreeSet;
use std::sync::OnceLock;

use rand::seq::IndexedRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::HarnessError;
use crate::domain::{EngagementLevel, Outcome, TerminalFlag, TourName, TourState, NUM_ACTIONS, NUM_STATES};
use crate::learner::{
    plan_into, select_action, LearnerError, PlannerConfig, StagePolicy, TabularDomain, TabularModel, TourDomain,
    DEFAULT_HORIZON,
};

/// The `(h, s, a)` pairs that some sequence of feasible actions and
/// observations can reach from a fresh tour.
#[derive(Debug, Clone)]
pub struct ReachableSet {
    horizon: usize,
    /// `states[h - 1]` flags the plannable slots reachable at step `h`.
    states: Vec<Vec<bool>>,
    pairs: u64,
}

impl ReachableSet {
    /// Breadth-first closure over every feasible action and every
    /// engagement/termination report.
    pub fn new(horizon: usize) -> ReachableSet {
        let domain = TourDomain::get();
        let slots = domain.plannable_states().len();
        let mut states = vec![vec![false; slots]; horizon];
        let mut frontier: Vec<TourState> = TourName::ALL.iter().map(|&t| TourState::fresh(t)).collect();
        let mut pairs = 0;
        for h in 1..=horizon {
            for s in &frontier {
                states[h - 1][domain.slot(s.encode()).unwrap()] = true;
                pairs += s.feasible_actions().len() as u64;
            }
            if h == horizon {
                break;
            }
            let mut next = BTreeSet::new();
            for s in &frontier {
                for a in s.feasible_actions().iter() {
                    for engagement in EngagementLevel::ALL {
                        for termination in [TerminalFlag::None, TerminalFlag::Stopped, TerminalFlag::Abandoned] {
                            let n = s.apply_action(a, Outcome { engagement, termination }).unwrap();
                            if !n.is_terminal() {
                                next.insert(n.encode());
                            }
                        }
                    }
                }
            }
            frontier = next.into_iter().map(|i| TourState::decode(i).unwrap()).collect();
        }
        ReachableSet { horizon, states, pairs }
    }

    /// Shared set for the default horizon, computed on first use.
    pub fn standard() -> &'static ReachableSet {
        static SET: OnceLock<ReachableSet> = OnceLock::new();
        SET.get_or_init(|| ReachableSet::new(DEFAULT_HORIZON))
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    /// Number of reachable `(h, s, a)` pairs.
    pub fn pairs(&self) -> u64 {
        self.pairs
    }

    /// Number of reachable `(h, s)` pairs.
    pub fn stage_states(&self) -> u64 {
        self.states.iter().flatten().filter(|&&b| b).count() as u64
    }

    pub fn contains(&self, h: usize, state: usize, action: usize) -> bool {
        if !(1..=self.horizon).contains(&h) || action >= NUM_ACTIONS {
            return false;
        }
        let domain = TourDomain::get();
        domain.slot(state).is_some_and(|slot| self.states[h - 1][slot]) && domain.feasible(state) & (1 << action) != 0
    }
}

/// Coverage after one snapshot.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CoverageWindow {
    /// Pairs explored for the first time since the previous snapshot.
    pub new_pairs: u64,
    pub cumulative_pairs: u64,
    /// Over the full `H x S x A` cross product.
    pub raw_fraction: f64,
    /// Over the reachable pairs.
    pub reachable_fraction: f64,
}

/// New and cumulative explored pairs across time-ordered snapshots. A pair is
/// explored once its count is positive; cumulative coverage never shrinks
/// even if a later snapshot lacks a pair.
pub fn exploration_coverage(snapshots: &[TabularModel], reachable: &ReachableSet) -> Vec<CoverageWindow> {
    let mut seen = BTreeSet::new();
    let mut reachable_seen = 0u64;
    let mut out = Vec::with_capacity(snapshots.len());
    for model in snapshots {
        let mut new_pairs = 0;
        for (h, s, a) in model.explored_pairs() {
            if seen.insert((h, s, a)) {
                new_pairs += 1;
                reachable_seen += u64::from(reachable.contains(h, s, a));
            }
        }
        let total = (model.horizon() * model.num_states() * model.num_actions()) as f64;
        out.push(CoverageWindow {
            new_pairs,
            cumulative_pairs: seen.len() as u64,
            raw_fraction: seen.len() as f64 / total,
            reachable_fraction: reachable_seen as f64 / reachable.pairs() as f64,
        });
    }
    out
}

/// Project future exploration: keep learning for `windows` windows of
/// `window_size` episodes, but draw each observed engagement uniformly and
/// never let a visitor leave early, which bounds from above what real tours
/// could explore. The policy is replanned before every episode after the
/// first. The projection is repeated `runs` times from the same starting
/// model; the result is the mean new-pair count of each window.
pub fn simulate_future_exploration<R: Rng + ?Sized>(
    model: &TabularModel,
    policy: &StagePolicy,
    planner: &PlannerConfig,
    windows: usize,
    window_size: usize,
    runs: usize,
    rng: &mut R,
) -> Result<Vec<f64>, HarnessError> {
    assert!(runs >= 1, "at least one projection run");
    let mut total = vec![0u64; windows];
    for _ in 0..runs {
        for (t, n) in total.iter_mut().zip(project_once(model, policy, planner, windows, window_size, rng)?) {
            *t += n;
        }
    }
    Ok(total.into_iter().map(|t| t as f64 / runs as f64).collect())
}

fn project_once<R: Rng + ?Sized>(
    model: &TabularModel,
    policy: &StagePolicy,
    planner: &PlannerConfig,
    windows: usize,
    window_size: usize,
    rng: &mut R,
) -> Result<Vec<u64>, HarnessError> {
    assert_eq!(model.num_states(), NUM_STATES, "projection needs a tour-domain model");
    let domain = TourDomain::get();
    let mut model = model.clone();
    let mut policy = policy.clone();
    let mut curve = Vec::with_capacity(windows);
    let mut first = true;
    for _ in 0..windows {
        let mut new_pairs = 0;
        for _ in 0..window_size {
            if !first {
                plan_into(&model, domain, planner, &mut policy);
            }
            first = false;
            let tour = *TourName::ALL.choose(rng).unwrap();
            let mut state = TourState::fresh(tour);
            for h in 1..=model.horizon() {
                if state.is_terminal() {
                    break;
                }
                let action = select_action(&policy, &state, h)?;
                let engagement = *EngagementLevel::ALL.choose(rng).unwrap();
                let next = state
                    .apply_action(action, Outcome { engagement, termination: TerminalFlag::None })
                    .map_err(LearnerError::from)?;
                let (s, a) = (state.encode(), action.index());
                if model.visits(h, s, a) == 0 {
                    new_pairs += 1;
                }
                model.record(h, s, a, next.encode())?;
                state = next;
            }
        }
        curve.push(new_pairs);
    }
    Ok(curve)
}
