use std::collections::BTreeMap;

use super::LearnerError;

/// Visit counts `N_h(s, a, s')` of one `(h, s, a)` pair.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct PairCounts {
    pub total: u64,
    pub next: BTreeMap<u32, u64>,
}

/// Stepwise transition counts, from which the empirical model
/// `p_h(s' | s, a) = N_h(s, a, s') / N_h(s, a, .)` is derived.
///
/// Steps are 1-based, `h = 1..=horizon`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TabularModel {
    horizon: usize,
    num_states: usize,
    num_actions: usize,
    stages: Vec<BTreeMap<(u32, u8), PairCounts>>,
}

impl TabularModel {
    pub fn new(horizon: usize, num_states: usize, num_actions: usize) -> TabularModel {
        assert!(horizon >= 1, "horizon must be positive");
        assert!(num_actions <= 16, "action sets are 16-bit masks");
        TabularModel { horizon, num_states, num_actions, stages: vec![BTreeMap::new(); horizon] }
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn num_states(&self) -> usize {
        self.num_states
    }

    pub fn num_actions(&self) -> usize {
        self.num_actions
    }

    fn check(&self, h: usize, s: usize, a: usize, next: usize) -> Result<(), LearnerError> {
        if h == 0 || h > self.horizon {
            return Err(LearnerError::HorizonExceeded { step: h, horizon: self.horizon });
        }
        if s >= self.num_states || next >= self.num_states || a >= self.num_actions {
            return Err(LearnerError::OutOfRange { step: h, state: s, action: a, next });
        }
        Ok(())
    }

    /// Add `count` observations of `(s, a) -> next` at step `h`.
    pub fn add(&mut self, h: usize, s: usize, a: usize, next: usize, count: u64) -> Result<(), LearnerError> {
        self.check(h, s, a, next)?;
        if count == 0 {
            return Ok(());
        }
        let pair = self.stages[h - 1].entry((s as u32, a as u8)).or_default();
        pair.total += count;
        *pair.next.entry(next as u32).or_insert(0) += count;
        Ok(())
    }

    pub fn record(&mut self, h: usize, s: usize, a: usize, next: usize) -> Result<(), LearnerError> {
        self.add(h, s, a, next, 1)
    }

    pub fn pair(&self, h: usize, s: usize, a: usize) -> Option<&PairCounts> {
        self.stages.get(h.checked_sub(1)?)?.get(&(s as u32, a as u8))
    }

    /// `N_h(s, a, .)`.
    pub fn visits(&self, h: usize, s: usize, a: usize) -> u64 {
        self.pair(h, s, a).map_or(0, |p| p.total)
    }

    pub fn count(&self, h: usize, s: usize, a: usize, next: usize) -> u64 {
        self.pair(h, s, a).and_then(|p| p.next.get(&(next as u32)).copied()).unwrap_or(0)
    }

    /// Empirical transition probability; `None` for an unvisited pair.
    pub fn probability(&self, h: usize, s: usize, a: usize, next: usize) -> Option<f64> {
        let p = self.pair(h, s, a)?;
        Some(p.next.get(&(next as u32)).copied().unwrap_or(0) as f64 / p.total as f64)
    }

    /// Visited pairs of step `h`, ordered by `(state, action)`.
    pub fn stage(&self, h: usize) -> impl Iterator<Item = (usize, usize, &PairCounts)> {
        self.stages[h - 1].iter().map(|(&(s, a), p)| (s as usize, usize::from(a), p))
    }

    /// Every non-zero count as `(h, s, a, s', n)`, in lexicographic order.
    pub fn entries(&self) -> impl Iterator<Item = (usize, usize, usize, usize, u64)> + '_ {
        self.stages.iter().enumerate().flat_map(|(i, stage)| {
            stage.iter().flat_map(move |(&(s, a), p)| {
                p.next.iter().map(move |(&n, &c)| (i + 1, s as usize, usize::from(a), n as usize, c))
            })
        })
    }

    /// `(h, s, a)` triples with a positive count, in lexicographic order.
    pub fn explored_pairs(&self) -> impl Iterator<Item = (usize, usize, usize)> + '_ {
        self.stages
            .iter()
            .enumerate()
            .flat_map(|(i, stage)| stage.keys().map(move |&(s, a)| (i + 1, s as usize, usize::from(a))))
    }

    pub fn explored_count(&self) -> usize {
        self.stages.iter().map(BTreeMap::len).sum()
    }

    pub fn total_transitions(&self) -> u64 {
        self.stages.iter().flat_map(|s| s.values()).map(|p| p.total).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.stages.iter().all(BTreeMap::is_empty)
    }
}
