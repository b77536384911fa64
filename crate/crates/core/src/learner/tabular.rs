use std::sync::OnceLock;

use crate::domain::{ActionId, TourState, NUM_ACTIONS, NUM_STATES};
use crate::engagement::planning_reward;

/// Finite state/action space the planner sweeps over.
///
/// States and actions are dense indices. Action sets are bitmasks, so at most
/// 16 actions are supported.
pub trait TabularDomain {
    fn num_states(&self) -> usize;
    fn num_actions(&self) -> usize;
    /// Non-terminal states in increasing index order. Every other state is
    /// absorbing with value zero.
    fn plannable_states(&self) -> &[u32];
    /// Position of `state` in [`plannable_states`](Self::plannable_states).
    fn slot(&self, state: usize) -> Option<usize>;
    /// Bitmask of the actions allowed in `state`.
    fn feasible(&self, state: usize) -> u16;
    /// Reward surrogate `r(s)` used during planning.
    fn planning_reward(&self, state: usize) -> f64;
    /// An action that makes no progress and earns nothing. The planner pins
    /// its value to zero so it is only chosen when nothing else is allowed.
    fn idle_action(&self) -> Option<usize> {
        None
    }
}

/// The tour-guide decision process in tabular form.
#[derive(Debug)]
pub struct TourDomain {
    plannable: Vec<u32>,
    feasible: Vec<u16>,
    reward: Vec<f64>,
}

impl TourDomain {
    /// Shared instance; the tables are built once.
    pub fn get() -> &'static TourDomain {
        static DOMAIN: OnceLock<TourDomain> = OnceLock::new();
        DOMAIN.get_or_init(TourDomain::build)
    }

    fn build() -> TourDomain {
        let mut plannable = Vec::with_capacity(NUM_STATES / 4);
        let mut feasible = Vec::with_capacity(NUM_STATES);
        let mut reward = Vec::with_capacity(NUM_STATES);
        for i in 0..NUM_STATES {
            let s = TourState::decode(i).unwrap();
            if !s.is_terminal() {
                plannable.push(i as u32);
                reward.push(planning_reward(s.engagement));
            } else {
                reward.push(0.0);
            }
            feasible.push(s.feasible_actions().bits());
        }
        TourDomain { plannable, feasible, reward }
    }
}

impl TabularDomain for TourDomain {
    fn num_states(&self) -> usize {
        NUM_STATES
    }

    fn num_actions(&self) -> usize {
        NUM_ACTIONS
    }

    fn plannable_states(&self) -> &[u32] {
        &self.plannable
    }

    fn slot(&self, state: usize) -> Option<usize> {
        // The terminal flag is the lowest radix of the index and `none` is 0.
        (state < NUM_STATES && state.is_multiple_of(4)).then_some(state / 4)
    }

    fn feasible(&self, state: usize) -> u16 {
        self.feasible[state]
    }

    fn planning_reward(&self, state: usize) -> f64 {
        self.reward[state]
    }

    fn idle_action(&self) -> Option<usize> {
        Some(ActionId::DO_NOTHING.index())
    }
}

/// A small explicit MDP, handy for tests and benchmarks of the planner.
///
/// `transitions[s][a]` lists `(next_state, weight)` pairs with integer
/// weights; the transition probability is weight over the row total.
#[derive(Debug, Clone)]
pub struct ExplicitMdp {
    pub rewards: Vec<f64>,
    pub terminal: Vec<bool>,
    pub feasible: Vec<u16>,
    pub transitions: Vec<Vec<Vec<(usize, u64)>>>,
    plannable: Vec<u32>,
    slots: Vec<Option<usize>>,
}

impl ExplicitMdp {
    pub fn new(
        rewards: Vec<f64>,
        terminal: Vec<bool>,
        feasible: Vec<u16>,
        transitions: Vec<Vec<Vec<(usize, u64)>>>,
    ) -> ExplicitMdp {
        let n = rewards.len();
        assert!(terminal.len() == n && feasible.len() == n && transitions.len() == n);
        let plannable: Vec<u32> = (0..n).filter(|&s| !terminal[s]).map(|s| s as u32).collect();
        let mut slots = vec![None; n];
        for (slot, &s) in plannable.iter().enumerate() {
            slots[s as usize] = Some(slot);
        }
        ExplicitMdp { rewards, terminal, feasible, transitions, plannable, slots }
    }

    pub fn probability(&self, s: usize, a: usize, next: usize) -> f64 {
        let row = &self.transitions[s][a];
        let total: u64 = row.iter().map(|&(_, w)| w).sum();
        let w: u64 = row.iter().filter(|&&(n, _)| n == next).map(|&(_, w)| w).sum();
        w as f64 / total as f64
    }
}

impl TabularDomain for ExplicitMdp {
    fn num_states(&self) -> usize {
        self.rewards.len()
    }

    fn num_actions(&self) -> usize {
        self.transitions.first().map_or(0, Vec::len)
    }

    fn plannable_states(&self) -> &[u32] {
        &self.plannable
    }

    fn slot(&self, state: usize) -> Option<usize> {
        self.slots.get(state).copied().flatten()
    }

    fn feasible(&self, state: usize) -> u16 {
        self.feasible[state]
    }

    fn planning_reward(&self, state: usize) -> f64 {
        self.rewards[state]
    }
}
