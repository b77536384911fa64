#![allow(dead_code)]

//! Shared fixtures: a small explicit MDP, an exact value-iteration oracle
//! written independently of the planner, and a UCBVI learning loop on it.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use tourguide_core::domain::EngagementLevel;
use tourguide_core::engagement::{planning_reward, sample_reward};
use tourguide_core::learner::{plan, plan_into, BonusConfig, ExplicitMdp, PlannerConfig, TabularModel};

pub const TOY_HORIZON: usize = 4;
pub const TOY_STATES: usize = 6;
pub const TOY_ACTIONS: usize = 3;

/// Engagement level of each toy state; state 5 is terminal.
pub const TOY_LEVELS: [EngagementLevel; 5] =
    [EngagementLevel::Low, EngagementLevel::Medium, EngagementLevel::High, EngagementLevel::Low, EngagementLevel::High];

pub fn toy_mdp() -> ExplicitMdp {
    let mut rewards: Vec<f64> = TOY_LEVELS.iter().map(|&l| planning_reward(l)).collect();
    rewards.push(0.0);
    let t = |pairs: &[(usize, u64)]| pairs.to_vec();
    let transitions = vec![
        vec![t(&[(1, 7), (3, 3)]), t(&[(2, 4), (3, 4), (5, 2)]), t(&[(4, 6), (5, 4)])],
        vec![t(&[(1, 5), (3, 5)]), t(&[(2, 6), (5, 4)]), t(&[(4, 3), (0, 7)])],
        vec![t(&[(2, 8), (3, 2)]), t(&[(4, 5), (1, 5)]), t(&[(5, 10)])],
        vec![t(&[(3, 10)]), t(&[(1, 6), (0, 4)]), t(&[(2, 3), (5, 7)])],
        vec![t(&[(4, 5), (5, 5)]), t(&[(2, 7), (3, 3)]), t(&[(1, 10)])],
        vec![t(&[(5, 1)]), t(&[(5, 1)]), t(&[(5, 1)])],
    ];
    let mut terminal = vec![false; TOY_STATES];
    terminal[5] = true;
    let mut feasible = vec![0b111u16; TOY_STATES];
    feasible[5] = 0;
    ExplicitMdp::new(rewards, terminal, feasible, transitions)
}

/// Exact finite-horizon value iteration with the `H - h` value ceiling.
/// Returns `(q[h][s][a], v[h][s])` for `h = 1..=H` at index `h - 1`.
pub fn oracle(mdp: &ExplicitMdp, horizon: usize) -> (Vec<Vec<Vec<f64>>>, Vec<Vec<f64>>) {
    let n = mdp.rewards.len();
    let m = mdp.transitions[0].len();
    let mut q = vec![vec![vec![0.0; m]; n]; horizon];
    let mut v = vec![vec![0.0; n]; horizon + 1];
    for h in (1..=horizon).rev() {
        for s in 0..n {
            if mdp.terminal[s] {
                continue;
            }
            let mut best = f64::NEG_INFINITY;
            for a in 0..m {
                let row = &mdp.transitions[s][a];
                let total: u64 = row.iter().map(|p| p.1).sum();
                let mut acc = 0.0;
                for &(next, w) in row {
                    acc += w as f64 * v[h][next];
                }
                q[h - 1][s][a] = mdp.rewards[s] + acc / total as f64;
                if mdp.feasible[s] & (1 << a) != 0 {
                    best = best.max(q[h - 1][s][a]);
                }
            }
            v[h - 1][s] = best.min((horizon - h) as f64);
        }
    }
    v.truncate(horizon);
    (q, v)
}

/// Value of a fixed policy from `start`, with the same ceiling.
pub fn evaluate(mdp: &ExplicitMdp, horizon: usize, start: usize, policy: impl Fn(usize, usize) -> usize) -> f64 {
    let n = mdp.rewards.len();
    let mut v = vec![0.0; n];
    for h in (1..=horizon).rev() {
        let mut next_v = vec![0.0; n];
        for s in 0..n {
            if mdp.terminal[s] {
                continue;
            }
            let a = policy(h, s);
            let expectation: f64 = (0..n).map(|t| mdp.probability(s, a, t) * v[t]).sum();
            next_v[s] = (mdp.rewards[s] + expectation).min((horizon - h) as f64);
        }
        v = next_v;
    }
    v[start]
}

/// Counts proportional to the true transition probabilities at every step.
pub fn true_model(mdp: &ExplicitMdp, horizon: usize) -> TabularModel {
    let mut model = TabularModel::new(horizon, mdp.rewards.len(), mdp.transitions[0].len());
    for h in 1..=horizon {
        for s in 0..mdp.rewards.len() {
            if mdp.terminal[s] {
                continue;
            }
            for (a, row) in mdp.transitions[s].iter().enumerate() {
                for &(next, w) in row {
                    model.add(h, s, a, next, w).unwrap();
                }
            }
        }
    }
    model
}

fn sample_next<R: Rng>(row: &[(usize, u64)], rng: &mut R) -> usize {
    let total: u64 = row.iter().map(|p| p.1).sum();
    let mut x = rng.random_range(0..total);
    for &(next, w) in row {
        if x < w {
            return next;
        }
        x -= w;
    }
    unreachable!()
}

pub struct ToyRun {
    /// Mean expected regret over episodes `1..=k` for each checkpoint `k`.
    pub mean_regret: Vec<f64>,
    /// Expected return of the policy that would act in the next episode.
    pub final_return: f64,
    /// Mean observed (sampled) return over the last 100 episodes.
    pub observed_tail: f64,
}

/// UCBVI from an empty model on the toy MDP, starting every episode in
/// state 0. Rewards observed along the way are drawn from the engagement
/// bins.
pub fn learn_toy(seed: u64, episodes: usize, checkpoints: &[usize]) -> ToyRun {
    let mdp = toy_mdp();
    let h_max = TOY_HORIZON;
    let (_, v_star) = oracle(&mdp, h_max);
    let optimum = v_star[0][0];
    let cfg = PlannerConfig::ucbvi(BonusConfig::default());
    let mut model = TabularModel::new(h_max, TOY_STATES, TOY_ACTIONS);
    let mut policy = plan(&model, &mdp, &cfg);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut regret = 0.0;
    let mut mean_regret = Vec::new();
    let mut observed = Vec::new();
    for k in 1..=episodes {
        plan_into(&model, &mdp, &cfg, &mut policy);
        regret += optimum - evaluate(&mdp, h_max, 0, |h, s| policy.action(h, s).unwrap());
        let mut s = 0;
        let mut ret = 0.0;
        for h in 1..=h_max {
            if mdp.terminal[s] {
                break;
            }
            let a = policy.action(h, s).unwrap();
            if h < h_max {
                ret += sample_reward(TOY_LEVELS[s], &mut rng).value();
            }
            let next = sample_next(&mdp.transitions[s][a], &mut rng);
            model.record(h, s, a, next).unwrap();
            s = next;
        }
        observed.push(ret);
        if checkpoints.contains(&k) {
            mean_regret.push(regret / k as f64);
        }
    }
    plan_into(&model, &mdp, &cfg, &mut policy);
    let final_return = evaluate(&mdp, h_max, 0, |h, s| policy.action(h, s).unwrap());
    let tail = &observed[observed.len().saturating_sub(100)..];
    ToyRun { mean_regret, final_return, observed_tail: tail.iter().sum::<f64>() / tail.len() as f64 }
}

use tourguide_core::domain::{ActionId, TerminalFlag, TourName, TourState};
use tourguide_core::engagement::EngagementSample;
use tourguide_core::learner::{
    run_episode, Controller, Environment, EnvironmentError, EpisodeTranscript, LearnerError, StepResponse,
};

/// Picks uniformly among the feasible actions.
pub struct RandomController(pub ChaCha8Rng);

impl Controller for RandomController {
    fn choose(&mut self, state: &TourState, _h: usize) -> Result<ActionId, LearnerError> {
        let options: Vec<ActionId> = state.feasible_actions().iter().collect();
        Ok(options[self.0.random_range(0..options.len())])
    }
}

/// Emits a short uniform engagement stream and ends the tour with the given
/// probability per step.
pub struct RandomWorld {
    pub rng: ChaCha8Rng,
    pub stop_probability: f64,
}

impl Environment for RandomWorld {
    fn respond(&mut self, _: &TourState, _: ActionId) -> Result<StepResponse, EnvironmentError> {
        let n = self.rng.random_range(1..4);
        let samples = (0..n).map(|t| EngagementSample::new(t as f64, self.rng.random::<f64>())).collect();
        let termination = if self.rng.random::<f64>() < self.stop_probability {
            if self.rng.random::<bool>() {
                TerminalFlag::Stopped
            } else {
                TerminalFlag::Abandoned
            }
        } else {
            TerminalFlag::None
        };
        Ok(StepResponse { samples, termination })
    }
}

/// A synthetic episode with random feasible actions and random engagement.
pub fn random_episode(seed: u64, id: u64, horizon: usize) -> EpisodeTranscript {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let tour = TourName::ALL[rng.random_range(0..4)];
    let mut controller = RandomController(ChaCha8Rng::seed_from_u64(rng.random()));
    let mut world = RandomWorld { rng: ChaCha8Rng::seed_from_u64(rng.random()), stop_probability: 0.05 };
    run_episode(id, tour, horizon, &mut controller, &mut world, &mut rng).unwrap()
}

/// Tallies `(h, s, a, s')` occurrences in one pass over the raw steps.
pub fn tally(episodes: &[EpisodeTranscript]) -> std::collections::BTreeMap<(usize, usize, usize, usize), u64> {
    let mut counts = std::collections::BTreeMap::new();
    for e in episodes {
        for step in &e.steps {
            *counts.entry((step.h, step.state.encode(), step.action.index(), step.next_state.encode())).or_insert(0) +=
                1;
        }
    }
    counts
}

pub fn proptest_config(cases: u32) -> proptest::test_runner::Config {
    proptest::test_runner::Config { cases, failure_persistence: None, ..Default::default() }
}

/// Every file under `root`, keyed by relative path.
pub fn dir_bytes(root: &std::path::Path) -> std::collections::BTreeMap<std::path::PathBuf, Vec<u8>> {
    fn walk(
        root: &std::path::Path,
        dir: &std::path::Path,
        out: &mut std::collections::BTreeMap<std::path::PathBuf, Vec<u8>>,
    ) {
        for entry in std::fs::read_dir(dir).unwrap() {
            let path = entry.unwrap().path();
            if path.is_dir() {
                walk(root, &path, out);
            } else {
                out.insert(path.strip_prefix(root).unwrap().to_path_buf(), std::fs::read(&path).unwrap());
            }
        }
    }
    let mut out = std::collections::BTreeMap::new();
    walk(root, root, &mut out);
    out
}

/// Writes `episodes` as a log, bootstraps from it and compares every count
/// with [`tally`]. Returns a description of the first difference.
pub fn bootstrap_matches_tally(episodes: &[EpisodeTranscript], dir: &std::path::Path) -> Result<(), String> {
    use tourguide_core::harness::{bootstrap, EpisodeLogWriter, LogHeader};
    let path = dir.join("log.jsonl");
    let header = LogHeader { config_hash: "synthetic".into(), seed: 0, horizon: 20 };
    let mut writer = EpisodeLogWriter::create(&path, Some(&header)).map_err(|e| e.to_string())?;
    for e in episodes {
        writer.write_episode(e).map_err(|e| e.to_string())?;
    }
    drop(writer);
    let model = bootstrap(&path).map_err(|e| e.to_string())?;
    let expected = tally(episodes);
    let got: std::collections::BTreeMap<_, _> = model.entries().map(|(h, s, a, n, c)| ((h, s, a, n), c)).collect();
    if got == expected {
        Ok(())
    } else {
        Err(format!("model has {} entries, tally {}", got.len(), expected.len()))
    }
}
