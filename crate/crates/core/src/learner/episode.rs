use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{select_action, LearnerError, StagePolicy, TabularModel};
use crate::domain::{ActionId, EngagementLevel, Outcome, TerminalFlag, TourName, TourState};
use crate::engagement::{aggregate, sample_reward, EngagementSample};

/// One executed action.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Step {
    /// 1-based step index.
    pub h: usize,
    pub state: TourState,
    pub action: ActionId,
    pub samples: Vec<EngagementSample>,
    pub reward: f64,
    pub next_state: TourState,
}

impl Step {
    /// Engagement level observed during the action.
    pub fn level(&self) -> EngagementLevel {
        self.next_state.engagement
    }
}

/// One guided tour from the fresh state to a terminal flag or the horizon.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeTranscript {
    pub id: u64,
    pub tour: TourName,
    pub steps: Vec<Step>,
    pub outcome: TerminalFlag,
}

impl EpisodeTranscript {
    pub fn new(id: u64, tour: TourName) -> Self {
        EpisodeTranscript { id, tour, steps: Vec::new(), outcome: TerminalFlag::None }
    }

    pub fn final_state(&self) -> TourState {
        self.steps.last().map_or(TourState::fresh(self.tour), |s| s.next_state)
    }

    /// Exhibits described during the tour.
    pub fn stops(&self) -> usize {
        self.final_state().visited_count()
    }

    /// Ended normally with every exhibit of the tour described.
    pub fn completed(&self) -> bool {
        self.outcome == TerminalFlag::Ended && self.stops() == self.tour.exhibit_count()
    }

    /// Check the transcript invariants: contiguous steps from `h = 1`, a
    /// consistent state chain, feasible actions and a matching outcome.
    pub fn validate(&self, horizon: usize) -> Result<(), LearnerError> {
        let bad = |reason: String| LearnerError::MalformedEpisode { episode: self.id, reason };
        for (i, step) in self.steps.iter().enumerate() {
            if step.h != i + 1 {
                return Err(bad(format!("step {} carries h = {}", i + 1, step.h)));
            }
            if step.h > horizon {
                return Err(bad(format!("step {} exceeds horizon {horizon}", step.h)));
            }
            if step.state.tour != self.tour {
                return Err(bad(format!("step {} is on tour {}", step.h, step.state.tour)));
            }
            if i > 0 && self.steps[i - 1].next_state != step.state {
                return Err(bad(format!("step {} does not continue from step {}", step.h, i)));
            }
            let outcome = Outcome { engagement: step.next_state.engagement, termination: step.next_state.terminal };
            match step.state.apply_action(step.action, outcome) {
                Ok(next) if next == step.next_state => {}
                Ok(next) => {
                    return Err(bad(format!("step {}: expected next state {next}, found {}", step.h, step.next_state)))
                }
                Err(e) => return Err(bad(format!("step {}: {e}", step.h))),
            }
            if !step.reward.is_finite() {
                return Err(bad(format!("step {}: non-finite reward", step.h)));
            }
        }
        let expected = self.steps.last().map_or(TerminalFlag::None, |s| s.next_state.terminal);
        if self.outcome != expected {
            return Err(bad(format!("outcome {} but final state is {expected}", self.outcome)));
        }
        Ok(())
    }
}

/// Add every `(h, s_h, a_h, s_{h+1})` of a valid episode to the counts.
/// Nothing is recorded if the episode is malformed.
pub fn update_model(model: &mut TabularModel, episode: &EpisodeTranscript) -> Result<(), LearnerError> {
    episode.validate(model.horizon())?;
    for step in &episode.steps {
        model.record(step.h, step.state.encode(), step.action.index(), step.next_state.encode())?;
    }
    Ok(())
}

/// Chooses the robot's actions during an episode.
pub trait Controller {
    fn choose(&mut self, state: &TourState, h: usize) -> Result<ActionId, LearnerError>;
}

impl Controller for StagePolicy {
    fn choose(&mut self, state: &TourState, h: usize) -> Result<ActionId, LearnerError> {
        select_action(self, state, h)
    }
}

impl<C: Controller + ?Sized> Controller for &mut C {
    fn choose(&mut self, state: &TourState, h: usize) -> Result<ActionId, LearnerError> {
        (**self).choose(state, h)
    }
}

/// What the world returns for one executed action.
#[derive(Debug, Clone, PartialEq)]
pub struct StepResponse {
    pub samples: Vec<EngagementSample>,
    pub termination: TerminalFlag,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
#[error("environment failure: {0}")]
pub struct EnvironmentError(pub String);

/// The people side of the interaction.
pub trait Environment {
    fn respond(&mut self, state: &TourState, action: ActionId) -> Result<StepResponse, EnvironmentError>;
}

/// Roll out one tour for at most `horizon` steps. Rewards are drawn from the
/// engagement level of each action's samples. An environment failure ends the
/// episode as abandoned.
pub fn run_episode<C, E, R>(
    id: u64,
    tour: TourName,
    horizon: usize,
    controller: &mut C,
    environment: &mut E,
    rng: &mut R,
) -> Result<EpisodeTranscript, LearnerError>
where
    C: Controller + ?Sized,
    E: Environment + ?Sized,
    R: Rng + ?Sized,
{
    let mut episode = EpisodeTranscript::new(id, tour);
    let mut state = TourState::fresh(tour);
    for h in 1..=horizon {
        if state.is_terminal() {
            break;
        }
        let action = controller.choose(&state, h)?;
        let response = environment
            .respond(&state, action)
            .unwrap_or(StepResponse { samples: Vec::new(), termination: TerminalFlag::Abandoned });
        let summary = aggregate(&response.samples);
        let next =
            state.apply_action(action, Outcome { engagement: summary.level, termination: response.termination })?;
        let reward = sample_reward(summary.level, rng).value();
        episode.steps.push(Step { h, state, action, samples: response.samples, reward, next_state: next });
        state = next;
    }
    episode.outcome = state.terminal;
    Ok(episode)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    struct Scripted(Vec<ActionId>);

    impl Controller for Scripted {
        fn choose(&mut self, _: &TourState, h: usize) -> Result<ActionId, LearnerError> {
            Ok(self.0[h - 1])
        }
    }

    struct Constant(f64, TerminalFlag);

    impl Environment for Constant {
        fn respond(&mut self, _: &TourState, _: ActionId) -> Result<StepResponse, EnvironmentError> {
            Ok(StepResponse { samples: vec![EngagementSample::new(0.0, self.0)], termination: self.1 })
        }
    }

    struct Broken;

    impl Environment for Broken {
        fn respond(&mut self, _: &TourState, _: ActionId) -> Result<StepResponse, EnvironmentError> {
            Err(EnvironmentError("sensor offline".into()))
        }
    }

    fn art_tour_script() -> Vec<ActionId> {
        let mut script = vec![ActionId::DESCRIBE_TOUR];
        for k in [3, 1, 5, 2, 4] {
            script.push(ActionId::goto(k));
            script.push(ActionId::DESCRIBE_EXHIBIT);
        }
        script.push(ActionId::END_TOUR);
        script
    }

    #[test]
    fn immediate_abandon() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let mut c = Scripted(art_tour_script());
        let mut env = Constant(0.1, TerminalFlag::Abandoned);
        let ep = run_episode(7, TourName::Art, 20, &mut c, &mut env, &mut rng).unwrap();
        assert_eq!(ep.steps.len(), 1);
        assert_eq!(ep.outcome, TerminalFlag::Abandoned);
        ep.validate(20).unwrap();
    }

    #[test]
    fn scripted_art_tour_completes() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let mut c = Scripted(art_tour_script());
        let mut env = Constant(0.5, TerminalFlag::None);
        let ep = run_episode(1, TourName::Art, 20, &mut c, &mut env, &mut rng).unwrap();
        assert_eq!(ep.steps.len(), 12);
        assert_eq!(ep.steps.last().unwrap().action, ActionId::END_TOUR);
        assert_eq!(ep.outcome, TerminalFlag::Ended);
        assert_eq!(ep.stops(), 5);
        assert!(ep.completed());
        for s in &ep.steps {
            assert!(s.reward > 1.0 / 3.0 && s.reward < 2.0 / 3.0);
        }
        ep.validate(20).unwrap();
    }

    #[test]
    fn horizon_truncates() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let mut c = Scripted(art_tour_script());
        let mut env = Constant(0.5, TerminalFlag::None);
        let ep = run_episode(1, TourName::Art, 4, &mut c, &mut env, &mut rng).unwrap();
        assert_eq!(ep.steps.len(), 4);
        assert_eq!(ep.outcome, TerminalFlag::None);
        ep.validate(4).unwrap();
    }

    #[test]
    fn environment_failure_is_abandonment() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let mut c = Scripted(art_tour_script());
        let ep = run_episode(1, TourName::Art, 20, &mut c, &mut Broken, &mut rng).unwrap();
        assert_eq!(ep.steps.len(), 1);
        assert_eq!(ep.outcome, TerminalFlag::Abandoned);
        assert!(ep.steps[0].samples.is_empty());
        assert_eq!(ep.steps[0].level(), EngagementLevel::Low);
    }

    #[test]
    fn infeasible_controller_choice_is_an_error() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let mut c = Scripted(vec![ActionId::END_TOUR]);
        let mut env = Constant(0.5, TerminalFlag::None);
        assert!(matches!(run_episode(1, TourName::Art, 20, &mut c, &mut env, &mut rng), Err(LearnerError::Domain(_))));
    }

    fn sample_episode() -> EpisodeTranscript {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let mut c = Scripted(art_tour_script());
        let mut env = Constant(0.8, TerminalFlag::None);
        run_episode(3, TourName::Art, 3, &mut c, &mut env, &mut rng).unwrap()
    }

    #[test]
    fn update_counts_each_step_once() {
        let ep = sample_episode();
        let mut m = TabularModel::new(20, crate::domain::NUM_STATES, crate::domain::NUM_ACTIONS);
        update_model(&mut m, &ep).unwrap();
        let entries: Vec<_> = m.entries().collect();
        assert_eq!(entries.len(), 3);
        assert!(entries.iter().all(|e| e.4 == 1));
        let once = m.clone();
        update_model(&mut m, &ep).unwrap();
        for (a, b) in once.entries().zip(m.entries()) {
            assert_eq!(a.4 * 2, b.4);
        }
    }

    #[test]
    fn empty_episode_changes_nothing() {
        let mut m = TabularModel::new(20, crate::domain::NUM_STATES, crate::domain::NUM_ACTIONS);
        update_model(&mut m, &EpisodeTranscript::new(0, TourName::Death)).unwrap();
        assert!(m.is_empty());
    }

    #[test]
    fn malformed_episodes_are_rejected() {
        let mut m = TabularModel::new(20, crate::domain::NUM_STATES, crate::domain::NUM_ACTIONS);

        let mut gap = sample_episode();
        gap.steps[1].h = 5;
        assert!(matches!(update_model(&mut m, &gap), Err(LearnerError::MalformedEpisode { episode: 3, .. })));

        let mut infeasible = sample_episode();
        infeasible.steps[1].action = ActionId::END_TOUR;
        assert!(update_model(&mut m, &infeasible).is_err());

        let mut broken_chain = sample_episode();
        broken_chain.steps[2].state.engagement = EngagementLevel::Low;
        broken_chain.steps[1].next_state.engagement = EngagementLevel::High;
        assert!(update_model(&mut m, &broken_chain).is_err());

        let mut wrong_outcome = sample_episode();
        wrong_outcome.outcome = TerminalFlag::Ended;
        assert!(update_model(&mut m, &wrong_outcome).is_err());

        assert!(m.is_empty());
    }
}
