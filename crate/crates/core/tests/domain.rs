mod common;

use std::collections::HashSet;

use common::random_episode;
use tourguide_core::domain::{
    table_successors, ActionId, ActionSet, EngagementLevel, Outcome, TerminalFlag, TourName, TourState, NUM_ACTIONS,
    NUM_STATES,
};

/// The action table written out by name.
fn table(prev: &str) -> &'static [&'static str] {
    const GOTOS: [&str; 6] = ["goto1", "goto2", "goto3", "goto4", "goto5", "goto6"];
    match prev {
        "doNothing" => &["doNothing", "describeTour"],
        "describeTour" => &GOTOS,
        "describeExhibit" => &["goto1", "goto2", "goto3", "goto4", "goto5", "goto6", "describeMore", "endTour"],
        "describeMore" => &["goto1", "goto2", "goto3", "goto4", "goto5", "goto6", "endTour"],
        "endTour" => &["doNothing"],
        _ => &["describeExhibit"],
    }
}

fn short_name(a: ActionId) -> String {
    match a.id() {
        0 => "doNothing".into(),
        1 => "describeTour".into(),
        k @ 2..=7 => format!("goto{}", k - 1),
        8 => "describeExhibit".into(),
        9 => "describeMore".into(),
        10 => "endTour".into(),
        _ => unreachable!(),
    }
}

#[test]
fn index_space_is_a_bijection() {
    assert_eq!(NUM_STATES, 33_792);
    let mut seen = HashSet::new();
    for i in 0..NUM_STATES {
        let s = TourState::decode(i).unwrap();
        assert_eq!(s.encode(), i);
        assert!(seen.insert(s));
    }
    assert!(TourState::decode(NUM_STATES).is_err());
    let last = TourState {
        visited: 63,
        tour: TourName::Art,
        prev_action: ActionId::END_TOUR,
        engagement: EngagementLevel::High,
        terminal: TerminalFlag::Abandoned,
    };
    assert_eq!(last.encode(), 33_791);
}

#[test]
fn feasible_sets_respect_the_table_everywhere() {
    for i in 0..NUM_STATES {
        let s = TourState::decode(i).unwrap();
        let feasible = s.feasible_actions();
        if s.is_terminal() {
            assert!(feasible.is_empty(), "{s}");
            continue;
        }
        let allowed = table(&short_name(s.prev_action));
        for a in feasible.iter() {
            let name = short_name(a);
            assert!(allowed.contains(&name.as_str()), "{name} after {s}");
            if let Some(k) = a.goto_exhibit() {
                assert!(!s.is_visited(k));
                assert!(k <= s.tour.exhibit_count());
            }
        }
        assert!(feasible.is_subset(table_successors(s.prev_action)));
    }
}

#[test]
fn table_successors_match_the_written_table() {
    for id in 0..NUM_ACTIONS as u8 {
        let a = ActionId::new(id).unwrap();
        let names: Vec<String> = table_successors(a).iter().map(short_name).collect();
        assert_eq!(names, table(&short_name(a)));
    }
}

#[test]
fn exhibit_counts() {
    assert_eq!(TourName::Death.exhibit_count(), 6);
    for t in [TourName::Tools, TourName::Religion, TourName::Art] {
        assert_eq!(t.exhibit_count(), 5);
    }
}

#[test]
fn random_rollouts_never_break_constraints() {
    for seed in 0..10_000u64 {
        let e = random_episode(seed, seed, 20);
        e.validate(20).unwrap();
        let mut gotos = HashSet::new();
        let mut prev = ActionId::DO_NOTHING;
        for step in &e.steps {
            assert!(table_successors(prev).contains(step.action));
            if let Some(k) = step.action.goto_exhibit() {
                assert!(gotos.insert(k), "episode {seed} repeats goto {k}");
                assert!(k < 6 || e.tour == TourName::Death);
            }
            prev = step.action;
        }
    }
}

#[test]
fn describe_exhibit_marks_the_pending_exhibit() {
    let start = TourState::fresh(TourName::Death);
    let ok = Outcome { engagement: EngagementLevel::Medium, termination: TerminalFlag::None };
    let s = start.apply_action(ActionId::DESCRIBE_TOUR, ok).unwrap();
    let s = s.apply_action(ActionId::goto(6), ok).unwrap();
    assert_eq!(s.visited, 0);
    let s = s.apply_action(ActionId::DESCRIBE_EXHIBIT, ok).unwrap();
    assert!(s.is_visited(6));
    assert!(!s.feasible_actions().contains(ActionId::goto(6)));
    assert_eq!(s.feasible_actions(), ActionSet::from_ids(&[2, 3, 4, 5, 6, 9, 10]));
}
