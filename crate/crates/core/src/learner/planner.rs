//! Bonus-augmented backward value iteration.
//!
//! For `h = H, ..., 1`:
//!
//! ```text
//! Q_h(s, a) = r(s) + b_h(s, a) + sum_s' p_h(s' | s, a) V_{h+1}(s')
//! V_h(s)    = min(H - h, max_a Q_h(s, a))
//! pi_h(s)   = argmax_{a in C_s} Q_h(s, a)
//! ```
//!
//! with `V_{H+1} = 0`, terminal states worth zero, and the bonus
//!
//! ```text
//! b = min(sqrt(1 / N) + (H - h) / (sigma * N), H - h)
//! ```
//!
//! where `N = N_h(s, a, .)`. An unvisited pair has no empirical successor
//! distribution; its expectation term is zero and its bonus is `H - h`.

use serde::{Deserialize, Serialize};

use super::{LearnerError, TabularDomain, TabularModel};
use crate::domain::{ActionId, TourState};

pub const DEFAULT_SIGMA: f64 = 20.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BonusConfig {
    pub sigma: f64,
    /// Treat the unknown successor of an unvisited pair as worth the value
    /// ceiling `H - h - 1`, so unvisited pairs are always preferred over
    /// poorly visited ones.
    pub optimistic_init: bool,
}

impl Default for BonusConfig {
    fn default() -> Self {
        BonusConfig { sigma: DEFAULT_SIGMA, optimistic_init: false }
    }
}

impl BonusConfig {
    pub fn validate(&self) -> Result<(), LearnerError> {
        if self.sigma > 0.0 && self.sigma.is_finite() {
            Ok(())
        } else {
            Err(LearnerError::InvalidConfig(format!("sigma must be positive, got {}", self.sigma)))
        }
    }
}

/// Exploration bonus for a pair visited `visits` times at step `h`.
pub fn bonus(h: usize, visits: u64, config: &BonusConfig, horizon: usize) -> f64 {
    debug_assert!((1..=horizon).contains(&h));
    let remaining = (horizon - h) as f64;
    if visits == 0 {
        return remaining;
    }
    let n = visits as f64;
    let b = (1.0 / n).sqrt() + remaining / (config.sigma * n);
    b.min(remaining)
}

/// Which actions the value backup maximises over.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BackupSet {
    /// Only the feasible set `C_s`.
    #[default]
    Feasible,
    /// Every action, feasible or not.
    AllActions,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct PlannerConfig {
    /// `None` plans without any exploration bonus.
    pub bonus: Option<BonusConfig>,
    pub backup: BackupSet,
}

impl PlannerConfig {
    pub fn ucbvi(bonus: BonusConfig) -> Self {
        PlannerConfig { bonus: Some(bonus), backup: BackupSet::Feasible }
    }

    pub fn greedy() -> Self {
        PlannerConfig { bonus: None, backup: BackupSet::Feasible }
    }
}

const NO_ACTION: u8 = u8::MAX;

/// Per-step values and the greedy policy extracted from them.
///
/// Tables only cover the domain's plannable states; every other state reads
/// as zero value with no action. Q is kept only for visited pairs: an
/// unvisited pair's Q is `r(s)` plus a per-step constant.
#[derive(Debug, Clone, PartialEq)]
pub struct StagePolicy {
    horizon: usize,
    num_actions: usize,
    slots: Vec<u32>,
    reward: Vec<f64>,
    idle: Option<usize>,
    unvisited: Vec<f64>,
    /// Per step, `(slot, action, q)` sorted by slot then action.
    visited: Vec<Vec<(u32, u8, f64)>>,
    v: Vec<f64>,
    action: Vec<u8>,
}

impl StagePolicy {
    fn empty() -> StagePolicy {
        StagePolicy {
            horizon: 0,
            num_actions: 0,
            slots: Vec::new(),
            reward: Vec::new(),
            idle: None,
            unvisited: Vec::new(),
            visited: Vec::new(),
            v: Vec::new(),
            action: Vec::new(),
        }
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    fn plannable(&self) -> usize {
        self.reward.len()
    }

    fn slot(&self, state: usize) -> Option<usize> {
        self.slots.get(state).copied().filter(|&s| s != u32::MAX).map(|s| s as usize)
    }

    fn row(&self, h: usize, slot: usize) -> usize {
        (h - 1) * self.plannable() + slot
    }

    pub fn q(&self, h: usize, state: usize, action: usize) -> f64 {
        match self.slot(state) {
            Some(slot) if (1..=self.horizon).contains(&h) && action < self.num_actions => {
                if self.idle == Some(action) {
                    return 0.0;
                }
                let stage = &self.visited[h - 1];
                let key = (slot as u32, action as u8);
                match stage.binary_search_by(|&(s, a, _)| (s, a).cmp(&key)) {
                    Ok(i) => stage[i].2,
                    Err(_) => self.reward[slot] + self.unvisited[h - 1],
                }
            }
            _ => 0.0,
        }
    }

    /// `V_h(s)`, with `V_{H+1} = 0`.
    pub fn v(&self, h: usize, state: usize) -> f64 {
        match self.slot(state) {
            Some(slot) if (1..=self.horizon).contains(&h) => self.v[self.row(h, slot)],
            _ => 0.0,
        }
    }

    /// `pi_h(s)`; `None` for terminal states or empty feasible sets.
    pub fn action(&self, h: usize, state: usize) -> Option<usize> {
        let slot = self.slot(state)?;
        if !(1..=self.horizon).contains(&h) {
            return None;
        }
        let a = self.action[self.row(h, slot)];
        (a != NO_ACTION).then_some(usize::from(a))
    }

    /// Decision rules as `(h, state, action)` triples, ordered by step then
    /// state.
    pub fn decisions(&self) -> impl Iterator<Item = (usize, usize, usize)> + '_ {
        let states: Vec<usize> = (0..self.slots.len()).filter(|&s| self.slots[s] != u32::MAX).collect();
        (1..=self.horizon).flat_map(move |h| {
            let states = states.clone();
            states.into_iter().filter_map(move |s| self.action(h, s).map(|a| (h, s, a)))
        })
    }
}

/// Plan from scratch.
pub fn plan<D: TabularDomain + ?Sized>(model: &TabularModel, domain: &D, config: &PlannerConfig) -> StagePolicy {
    let mut out = StagePolicy::empty();
    plan_into(model, domain, config, &mut out);
    out
}

/// Plan into an existing policy, reusing its buffers when the shapes match.
pub fn plan_into<D: TabularDomain + ?Sized>(
    model: &TabularModel,
    domain: &D,
    config: &PlannerConfig,
    out: &mut StagePolicy,
) {
    assert_eq!(model.num_states(), domain.num_states(), "model and domain disagree on states");
    assert_eq!(model.num_actions(), domain.num_actions(), "model and domain disagree on actions");
    let horizon = model.horizon();
    let num_actions = domain.num_actions();
    let plannable = domain.plannable_states();
    let p = plannable.len();

    if out.slots.len() != domain.num_states() || out.horizon != horizon || out.num_actions != num_actions {
        let mut slots = vec![u32::MAX; domain.num_states()];
        for (slot, &s) in plannable.iter().enumerate() {
            slots[s as usize] = slot as u32;
        }
        *out = StagePolicy {
            horizon,
            num_actions,
            slots,
            reward: Vec::new(),
            idle: None,
            unvisited: vec![0.0; horizon],
            visited: vec![Vec::new(); horizon],
            v: vec![0.0; horizon * p],
            action: vec![NO_ACTION; horizon * p],
        };
    }
    out.reward.clear();
    out.reward.extend(plannable.iter().map(|&s| domain.planning_reward(s as usize)));
    out.idle = domain.idle_action();

    let all_actions: u16 = if num_actions == 16 { u16::MAX } else { (1 << num_actions) - 1 };
    let mut row = [0.0f64; 16];
    let row = &mut row[..num_actions];

    for h in (1..=horizon).rev() {
        let remaining = (horizon - h) as f64;
        let unvisited_extra = match config.bonus {
            None => 0.0,
            Some(b) if b.optimistic_init => remaining + (remaining - 1.0).max(0.0),
            Some(_) => remaining,
        };
        out.unvisited[h - 1] = unvisited_extra;

        let (v_head, v_tail) = out.v.split_at_mut(h * p);
        let v_stage = &mut v_head[(h - 1) * p..];
        let v_next: &[f64] = if h < horizon { &v_tail[..p] } else { &[] };
        let visited = &mut out.visited[h - 1];
        visited.clear();

        let backup = |feasible: u16| match config.backup {
            BackupSet::Feasible => feasible,
            BackupSet::AllActions => all_actions,
        };

        for (slot, &s) in plannable.iter().enumerate() {
            let u = out.reward[slot] + unvisited_extra;
            let feasible = domain.feasible(s as usize);
            let best = uniform_argmax(u, out.idle, feasible);
            let max_backup = if backup(feasible) == feasible {
                best.map(|a| if Some(a) == out.idle { 0.0 } else { u })
            } else {
                uniform_argmax(u, out.idle, all_actions).map(|a| if Some(a) == out.idle { 0.0 } else { u })
            };
            v_stage[slot] = max_backup.map_or(0.0, |m| m.min(remaining));
            out.action[(h - 1) * p + slot] = best.map_or(NO_ACTION, |a| a as u8);
        }

        // Stage pairs come ordered by state, and slots increase with state.
        let mut pairs = model.stage(h).filter_map(|(s, a, pair)| domain.slot(s).map(|slot| (slot, a, pair))).peekable();
        while let Some(&(slot, _, _)) = pairs.peek() {
            let r = out.reward[slot];
            row.fill(r + unvisited_extra);
            while let Some((_, a, pair)) = pairs.next_if(|&(ps, _, _)| ps == slot) {
                let expectation = if v_next.is_empty() {
                    0.0
                } else {
                    let total = pair.total as f64;
                    pair.next
                        .iter()
                        .map(|(&n, &c)| {
                            let vn = domain.slot(n as usize).map_or(0.0, |ns| v_next[ns]);
                            c as f64 / total * vn
                        })
                        .sum()
                };
                let b = config.bonus.map_or(0.0, |cfg| bonus(h, pair.total, &cfg, horizon));
                row[a] = r + b + expectation;
                visited.push((slot as u32, a as u8, row[a]));
            }
            if let Some(i) = out.idle {
                row[i] = 0.0;
            }
            let feasible = domain.feasible(plannable[slot] as usize);
            let best = argmax(row, feasible);
            let max_backup = if backup(feasible) == feasible {
                best.map(|a| row[a])
            } else {
                argmax(row, backup(feasible)).map(|a| row[a])
            };
            v_stage[slot] = max_backup.map_or(0.0, |m| m.min(remaining));
            out.action[(h - 1) * p + slot] = best.map_or(NO_ACTION, |a| a as u8);
        }
    }
}

/// [`argmax`] of a row where every entry is `u` except the idle action,
/// which is zero.
fn uniform_argmax(u: f64, idle: Option<usize>, mask: u16) -> Option<usize> {
    let idle_bit = idle.map_or(0, |i| 1u16 << i);
    let others = mask & !idle_bit;
    let first = (others != 0).then(|| others.trailing_zeros() as usize);
    match (first, idle.filter(|_| mask & idle_bit != 0)) {
        (None, idle) => idle,
        (Some(a), None) => Some(a),
        (Some(a), Some(i)) => Some(if 0.0 > u || (0.0 == u && i < a) { i } else { a }),
    }
}

/// Highest entry among `mask`; ties go to the lowest index.
fn argmax(row: &[f64], mask: u16) -> Option<usize> {
    let mut rest = mask & ((1u32 << row.len()) - 1) as u16;
    let mut best: Option<usize> = None;
    while rest != 0 {
        let a = rest.trailing_zeros() as usize;
        rest &= rest - 1;
        if best.is_none_or(|b| row[a] > row[b]) {
            best = Some(a);
        }
    }
    best
}

/// The policy's action in a tour state at step `h`.
pub fn select_action(policy: &StagePolicy, state: &TourState, h: usize) -> Result<ActionId, LearnerError> {
    if state.is_terminal() {
        return Err(LearnerError::TerminalState(*state));
    }
    if h == 0 || h > policy.horizon() {
        return Err(LearnerError::HorizonExceeded { step: h, horizon: policy.horizon() });
    }
    policy.action(h, state.encode()).and_then(|a| ActionId::new(a as u8)).ok_or(LearnerError::NoFeasibleAction(*state))
}
