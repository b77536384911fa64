//! The tour-guide decision process: states, actions, successor constraints
//! and the dense state index used by the tabular learner.
//!
//! A state is the tuple `<v1..v6, tour, previous action, engagement, terminal>`.
//! The feasible actions in a state are the successors of its previous action
//! in the action table below, filtered by which exhibits were already shown,
//! by the tour (only `death` has a sixth exhibit) and by the terminal flag.
//!
//! | id | action              | successors                   |
//! |----|---------------------|------------------------------|
//! | 0  | doNothing           | 0, 1                         |
//! | 1  | describeTour        | 2..6, 7 (death only)         |
//! | 2-7| gotoExhibit_1..6    | 8                            |
//! | 8  | describeExhibit     | unvisited gotos, 9, 10       |
//! | 9  | describeMoreExhibit | unvisited gotos, 10          |
//! | 10 | endTour             | 0                            |

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const NUM_ACTIONS: usize = 11;
pub const MAX_EXHIBITS: usize = 6;
/// Number of slots in the dense state index: 2^6 * 4 * 11 * 3 * 4.
pub const NUM_STATES: usize = 64 * 4 * NUM_ACTIONS * 3 * 4;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum DomainError {
    #[error("action {action} is not feasible in state {state}")]
    InfeasibleAction { action: ActionId, state: TourState },
    #[error("state index {0} out of range")]
    IndexOutOfRange(usize),
    #[error("unknown {kind} `{value}`")]
    UnknownName { kind: &'static str, value: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TourName {
    Death,
    Tools,
    Religion,
    Art,
}

impl TourName {
    pub const ALL: [TourName; 4] = [TourName::Death, TourName::Tools, TourName::Religion, TourName::Art];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<Self> {
        Self::ALL.get(i).copied()
    }

    /// Nominal number of exhibits in the tour.
    pub fn exhibit_count(self) -> usize {
        match self {
            TourName::Death => 6,
            _ => 5,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            TourName::Death => "death",
            TourName::Tools => "tools",
            TourName::Religion => "religion",
            TourName::Art => "art",
        }
    }
}

impl fmt::Display for TourName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for TourName {
    type Err = DomainError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::ALL
            .into_iter()
            .find(|t| t.name() == s)
            .ok_or_else(|| DomainError::UnknownName { kind: "tour", value: s.to_string() })
    }
}

/// Discretised engagement. Ordered `Low < Medium < High`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum EngagementLevel {
    Low,
    Medium,
    High,
}

impl EngagementLevel {
    pub const ALL: [EngagementLevel; 3] = [EngagementLevel::Low, EngagementLevel::Medium, EngagementLevel::High];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<Self> {
        Self::ALL.get(i).copied()
    }

    pub fn name(self) -> &'static str {
        match self {
            EngagementLevel::Low => "LOW",
            EngagementLevel::Medium => "MEDIUM",
            EngagementLevel::High => "HIGH",
        }
    }
}

impl fmt::Display for EngagementLevel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TerminalFlag {
    None,
    Ended,
    Stopped,
    Abandoned,
}

impl TerminalFlag {
    pub const ALL: [TerminalFlag; 4] =
        [TerminalFlag::None, TerminalFlag::Ended, TerminalFlag::Stopped, TerminalFlag::Abandoned];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<Self> {
        Self::ALL.get(i).copied()
    }

    pub fn is_terminal(self) -> bool {
        self != TerminalFlag::None
    }

    pub fn name(self) -> &'static str {
        match self {
            TerminalFlag::None => "none",
            TerminalFlag::Ended => "ended",
            TerminalFlag::Stopped => "stopped",
            TerminalFlag::Abandoned => "abandoned",
        }
    }
}

impl fmt::Display for TerminalFlag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// One of the eleven tour-guide actions, identified by its table id.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "u8", into = "u8")]
pub struct ActionId(u8);

impl ActionId {
    pub const DO_NOTHING: ActionId = ActionId(0);
    pub const DESCRIBE_TOUR: ActionId = ActionId(1);
    pub const DESCRIBE_EXHIBIT: ActionId = ActionId(8);
    pub const DESCRIBE_MORE_EXHIBIT: ActionId = ActionId(9);
    pub const END_TOUR: ActionId = ActionId(10);

    const NAMES: [&'static str; NUM_ACTIONS] = [
        "doNothing",
        "describeTour",
        "gotoExhibit_1",
        "gotoExhibit_2",
        "gotoExhibit_3",
        "gotoExhibit_4",
        "gotoExhibit_5",
        "gotoExhibit_6",
        "describeExhibit",
        "describeMoreExhibit",
        "endTour",
    ];

    pub fn new(id: u8) -> Option<Self> {
        (usize::from(id) < NUM_ACTIONS).then_some(ActionId(id))
    }

    /// `gotoExhibit_k` for `k` in `1..=6`.
    pub fn goto(exhibit: usize) -> ActionId {
        assert!((1..=MAX_EXHIBITS).contains(&exhibit), "exhibit {exhibit} out of range");
        ActionId(exhibit as u8 + 1)
    }

    pub fn all() -> impl Iterator<Item = ActionId> {
        (0..NUM_ACTIONS as u8).map(ActionId)
    }

    pub fn id(self) -> u8 {
        self.0
    }

    pub fn index(self) -> usize {
        usize::from(self.0)
    }

    /// The exhibit a goto action leads to.
    pub fn goto_exhibit(self) -> Option<usize> {
        (2..=7).contains(&self.0).then(|| usize::from(self.0) - 1)
    }

    pub fn name(self) -> &'static str {
        Self::NAMES[self.index()]
    }
}

impl TryFrom<u8> for ActionId {
    type Error = String;

    fn try_from(value: u8) -> Result<Self, Self::Error> {
        ActionId::new(value).ok_or_else(|| format!("action id {value} out of range"))
    }
}

impl From<ActionId> for u8 {
    fn from(a: ActionId) -> u8 {
        a.0
    }
}

impl fmt::Display for ActionId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ActionId {
    type Err = DomainError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        ActionId::NAMES
            .iter()
            .position(|n| *n == s)
            .map(|i| ActionId(i as u8))
            .ok_or_else(|| DomainError::UnknownName { kind: "action", value: s.to_string() })
    }
}

/// A set of actions stored as a bitmask over action ids.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub struct ActionSet(u16);

impl ActionSet {
    pub const EMPTY: ActionSet = ActionSet(0);

    pub fn from_ids(ids: &[u8]) -> ActionSet {
        ActionSet(ids.iter().fold(0, |m, &i| m | (1 << i)))
    }

    pub fn from_bits(bits: u16) -> ActionSet {
        ActionSet(bits & ((1 << NUM_ACTIONS) - 1))
    }

    pub fn bits(self) -> u16 {
        self.0
    }

    pub fn contains(self, a: ActionId) -> bool {
        self.0 & (1 << a.0) != 0
    }

    pub fn insert(&mut self, a: ActionId) {
        self.0 |= 1 << a.0;
    }

    pub fn remove(&mut self, a: ActionId) {
        self.0 &= !(1 << a.0);
    }

    pub fn is_empty(self) -> bool {
        self.0 == 0
    }

    pub fn len(self) -> usize {
        self.0.count_ones() as usize
    }

    pub fn is_subset(self, other: ActionSet) -> bool {
        self.0 & !other.0 == 0
    }

    /// Members in increasing id order.
    pub fn iter(self) -> impl Iterator<Item = ActionId> {
        ActionId::all().filter(move |a| self.contains(*a))
    }
}

impl FromIterator<ActionId> for ActionSet {
    fn from_iter<I: IntoIterator<Item = ActionId>>(iter: I) -> Self {
        let mut s = ActionSet::EMPTY;
        for a in iter {
            s.insert(a);
        }
        s
    }
}

/// Static successor column of the action table, before any filtering.
pub fn table_successors(prev: ActionId) -> ActionSet {
    match prev.0 {
        0 => ActionSet::from_ids(&[0, 1]),
        1 => ActionSet::from_ids(&[2, 3, 4, 5, 6, 7]),
        2..=7 => ActionSet::from_ids(&[8]),
        8 => ActionSet::from_ids(&[2, 3, 4, 5, 6, 7, 9, 10]),
        9 => ActionSet::from_ids(&[2, 3, 4, 5, 6, 7, 10]),
        10 => ActionSet::from_ids(&[0]),
        _ => unreachable!("action ids are range-checked"),
    }
}

/// Full learner state.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct TourState {
    /// Bit `k - 1` is set once exhibit `k` has been described.
    pub visited: u8,
    pub tour: TourName,
    pub prev_action: ActionId,
    pub engagement: EngagementLevel,
    pub terminal: TerminalFlag,
}

impl fmt::Display for TourState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "<")?;
        for k in 1..=MAX_EXHIBITS {
            write!(f, "{}", u8::from(self.is_visited(k)))?;
        }
        write!(f, ", {}, {}, {}, {}>", self.tour, self.prev_action, self.engagement, self.terminal)
    }
}

/// What the environment reports after an action: the engagement level it
/// produced and whether it ended the tour.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Outcome {
    pub engagement: EngagementLevel,
    pub termination: TerminalFlag,
}

impl TourState {
    /// Fresh pre-tour state. No engagement has been observed yet, which reads
    /// as `Low` under the empty-stream rule.
    pub fn fresh(tour: TourName) -> TourState {
        TourState {
            visited: 0,
            tour,
            prev_action: ActionId::DO_NOTHING,
            engagement: EngagementLevel::Low,
            terminal: TerminalFlag::None,
        }
    }

    pub fn is_visited(&self, exhibit: usize) -> bool {
        self.visited & (1 << (exhibit - 1)) != 0
    }

    pub fn visited_count(&self) -> usize {
        self.visited.count_ones() as usize
    }

    pub fn is_terminal(&self) -> bool {
        self.terminal.is_terminal()
    }

    /// Exhibit the robot is standing at, waiting to describe.
    pub fn pending_exhibit(&self) -> Option<usize> {
        self.prev_action.goto_exhibit()
    }

    /// Structural consistency beyond the raw field ranges. Every state
    /// reachable from a fresh state is valid; the dense index also covers
    /// invalid combinations.
    pub fn is_valid(&self) -> bool {
        let tour_mask: u8 = (1 << self.tour.exhibit_count()) - 1;
        if self.visited & !tour_mask != 0 {
            return false;
        }
        match self.prev_action.0 {
            0 => self.visited == 0 && !self.is_terminal(),
            1 => self.visited == 0 && self.terminal != TerminalFlag::Ended,
            2..=7 => {
                let k = self.pending_exhibit().unwrap();
                k <= self.tour.exhibit_count() && !self.is_visited(k) && self.terminal != TerminalFlag::Ended
            }
            8 | 9 => self.visited != 0 && self.terminal != TerminalFlag::Ended,
            10 => self.terminal.is_terminal(),
            _ => false,
        }
    }

    /// Dense mixed-radix index, most significant field first:
    /// visited (64), tour (4), previous action (11), engagement (3), terminal (4).
    pub fn encode(&self) -> usize {
        let mut i = usize::from(self.visited);
        i = i * 4 + self.tour.index();
        i = i * NUM_ACTIONS + self.prev_action.index();
        i = i * 3 + self.engagement.index();
        i * 4 + self.terminal.index()
    }

    pub fn decode(index: usize) -> Result<TourState, DomainError> {
        if index >= NUM_STATES {
            return Err(DomainError::IndexOutOfRange(index));
        }
        let mut i = index;
        let terminal = TerminalFlag::from_index(i % 4).unwrap();
        i /= 4;
        let engagement = EngagementLevel::from_index(i % 3).unwrap();
        i /= 3;
        let prev_action = ActionId((i % NUM_ACTIONS) as u8);
        i /= NUM_ACTIONS;
        let tour = TourName::from_index(i % 4).unwrap();
        i /= 4;
        Ok(TourState { visited: i as u8, tour, prev_action, engagement, terminal })
    }

    /// The successor-constrained action set `C_s`.
    pub fn feasible_actions(&self) -> ActionSet {
        if self.is_terminal() {
            return ActionSet::EMPTY;
        }
        let mut set = table_successors(self.prev_action);
        for k in 1..=MAX_EXHIBITS {
            if self.is_visited(k) || k > self.tour.exhibit_count() {
                set.remove(ActionId::goto(k));
            }
        }
        set
    }

    /// Transition under `action`. `describeExhibit` marks the pending exhibit
    /// as visited; `endTour` always ends the tour unless the outcome reports an
    /// earlier stop or abandonment.
    pub fn apply_action(&self, action: ActionId, outcome: Outcome) -> Result<TourState, DomainError> {
        if !self.feasible_actions().contains(action) {
            return Err(DomainError::InfeasibleAction { action, state: *self });
        }
        let mut next = *self;
        if action == ActionId::DESCRIBE_EXHIBIT {
            let k = self.pending_exhibit().expect("describeExhibit only follows a goto");
            next.visited |= 1 << (k - 1);
        }
        next.prev_action = action;
        next.engagement = outcome.engagement;
        next.terminal = match (action, outcome.termination) {
            (ActionId::END_TOUR, TerminalFlag::None) => TerminalFlag::Ended,
            (_, t) => t,
        };
        Ok(next)
    }
}

/// Free-function form of [`TourState::feasible_actions`].
pub fn feasible_actions(state: &TourState) -> ActionSet {
    state.feasible_actions()
}
