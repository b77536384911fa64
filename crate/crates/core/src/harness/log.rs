//! On-disk formats.
//!
//! Episode logs are JSON lines: an optional header record followed by one
//! record per executed step, steps of an episode contiguous and in order.
//! Model snapshots are JSON lines too: a shape record, then one
//! `[h, s, a, s', count]` array per non-zero count. Policies are CSV.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{io_error, HarnessError};
use crate::domain::{ActionId, TerminalFlag, TourName, TourState};
use crate::engagement::EngagementSample;
use crate::learner::{update_model, EpisodeTranscript, StagePolicy, Step, TabularModel, DEFAULT_HORIZON};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogHeader {
    pub config_hash: String,
    pub seed: u64,
    pub horizon: usize,
}

#[derive(Debug, Serialize, Deserialize)]
struct StepRecord {
    episode: u64,
    tour: TourName,
    h: usize,
    state: usize,
    action: ActionId,
    samples: Vec<EngagementSample>,
    reward: f64,
    next_state: usize,
    terminal: TerminalFlag,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(tag = "record", rename_all = "lowercase")]
enum Record {
    Header(LogHeader),
    Step(StepRecord),
}

/// Appends episodes to a log, flushing after each one so an interrupted run
/// leaves every finished episode on disk.
pub struct EpisodeLogWriter {
    path: PathBuf,
    out: BufWriter<File>,
}

impl EpisodeLogWriter {
    pub fn create(path: &Path, header: Option<&LogHeader>) -> Result<Self, HarnessError> {
        let file = File::create(path).map_err(io_error(path))?;
        let mut writer = EpisodeLogWriter { path: path.to_path_buf(), out: BufWriter::new(file) };
        if let Some(h) = header {
            writer.write_record(&Record::Header(h.clone()))?;
            writer.flush()?;
        }
        Ok(writer)
    }

    fn write_record(&mut self, record: &Record) -> Result<(), HarnessError> {
        let line = serde_json::to_string(record).expect("records serialise");
        writeln!(self.out, "{line}").map_err(io_error(&self.path))
    }

    pub fn write_episode(&mut self, episode: &EpisodeTranscript) -> Result<(), HarnessError> {
        for step in &episode.steps {
            self.write_record(&Record::Step(StepRecord {
                episode: episode.id,
                tour: episode.tour,
                h: step.h,
                state: step.state.encode(),
                action: step.action,
                samples: step.samples.clone(),
                reward: step.reward,
                next_state: step.next_state.encode(),
                terminal: step.next_state.terminal,
            }))?;
        }
        self.flush()
    }

    pub fn flush(&mut self) -> Result<(), HarnessError> {
        self.out.flush().map_err(io_error(&self.path))
    }
}

/// Parse a log. Episodes come back in file order; structural checks beyond
/// parsing are left to [`EpisodeTranscript::validate`].
pub fn read_episodes(path: &Path) -> Result<(Option<LogHeader>, Vec<EpisodeTranscript>), HarnessError> {
    let file = File::open(path).map_err(io_error(path))?;
    let mut header = None;
    let mut episodes: Vec<EpisodeTranscript> = Vec::new();
    let mut seen = std::collections::HashSet::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line_no = i + 1;
        let line = line.map_err(io_error(path))?;
        if line.trim().is_empty() {
            continue;
        }
        let parse_err = |message: String| HarnessError::Parse { path: path.to_path_buf(), line: line_no, message };
        let record: Record = serde_json::from_str(&line).map_err(|e| parse_err(e.to_string()))?;
        match record {
            Record::Header(h) => {
                if header.is_some() || !episodes.is_empty() {
                    return Err(parse_err("header must be the first record".into()));
                }
                header = Some(h);
            }
            Record::Step(r) => {
                let state = TourState::decode(r.state).map_err(|e| parse_err(e.to_string()))?;
                let next_state = TourState::decode(r.next_state).map_err(|e| parse_err(e.to_string()))?;
                if next_state.terminal != r.terminal {
                    return Err(HarnessError::MalformedEpisode {
                        episode: r.episode,
                        reason: format!("line {line_no}: terminal flag {} disagrees with next state", r.terminal),
                    });
                }
                let continues = episodes.last().is_some_and(|e| e.id == r.episode);
                if !continues {
                    if !seen.insert(r.episode) {
                        return Err(HarnessError::MalformedEpisode {
                            episode: r.episode,
                            reason: format!("line {line_no}: steps are not contiguous"),
                        });
                    }
                    episodes.push(EpisodeTranscript::new(r.episode, r.tour));
                }
                let episode = episodes.last_mut().unwrap();
                if episode.tour != r.tour {
                    return Err(HarnessError::MalformedEpisode {
                        episode: r.episode,
                        reason: format!("line {line_no}: tour changes mid-episode"),
                    });
                }
                episode.steps.push(Step {
                    h: r.h,
                    state,
                    action: r.action,
                    samples: r.samples,
                    reward: r.reward,
                    next_state,
                });
                episode.outcome = r.terminal;
            }
        }
    }
    Ok((header, episodes))
}

/// Count the transitions of already parsed episodes into a fresh model.
pub fn bootstrap_from(episodes: &[EpisodeTranscript], horizon: usize) -> Result<TabularModel, HarnessError> {
    let mut model = TabularModel::new(horizon, crate::domain::NUM_STATES, crate::domain::NUM_ACTIONS);
    for episode in episodes {
        update_model(&mut model, episode)?;
    }
    Ok(model)
}

/// Build a model from an episode log. The horizon comes from the log header
/// when there is one.
pub fn bootstrap(path: &Path) -> Result<TabularModel, HarnessError> {
    let (header, episodes) = read_episodes(path)?;
    let horizon = header.map_or(DEFAULT_HORIZON, |h| h.horizon);
    bootstrap_from(&episodes, horizon)
}

#[derive(Debug, Serialize, Deserialize)]
struct SnapshotShape {
    horizon: usize,
    states: usize,
    actions: usize,
}

pub fn write_snapshot(path: &Path, model: &TabularModel) -> Result<(), HarnessError> {
    let file = File::create(path).map_err(io_error(path))?;
    let mut out = BufWriter::new(file);
    let shape = SnapshotShape { horizon: model.horizon(), states: model.num_states(), actions: model.num_actions() };
    let mut write = |line: String| writeln!(out, "{line}").map_err(io_error(path));
    write(serde_json::to_string(&shape).expect("shape serialises"))?;
    for (h, s, a, next, n) in model.entries() {
        write(format!("[{h},{s},{a},{next},{n}]"))?;
    }
    out.flush().map_err(io_error(path))
}

pub fn read_snapshot(path: &Path) -> Result<TabularModel, HarnessError> {
    let file = File::open(path).map_err(io_error(path))?;
    let mut model: Option<TabularModel> = None;
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(io_error(path))?;
        if line.trim().is_empty() {
            continue;
        }
        let parse_err = |message: String| HarnessError::Parse { path: path.to_path_buf(), line: i + 1, message };
        match &mut model {
            None => {
                let shape: SnapshotShape = serde_json::from_str(&line).map_err(|e| parse_err(e.to_string()))?;
                model = Some(TabularModel::new(shape.horizon, shape.states, shape.actions));
            }
            Some(m) => {
                let [h, s, a, next, n]: [u64; 5] = serde_json::from_str(&line).map_err(|e| parse_err(e.to_string()))?;
                m.add(h as usize, s as usize, a as usize, next as usize, n).map_err(|e| parse_err(e.to_string()))?;
            }
        }
    }
    model.ok_or_else(|| HarnessError::Parse { path: path.to_path_buf(), line: 1, message: "empty snapshot".into() })
}

/// Write the decision rules as `h,state,action` rows.
pub fn export_policy(path: &Path, policy: &StagePolicy) -> Result<(), HarnessError> {
    let mut writer = csv::Writer::from_path(path).map_err(|e| csv_error(path, e))?;
    writer.write_record(["h", "state", "action"]).map_err(|e| csv_error(path, e))?;
    for (h, s, a) in policy.decisions() {
        writer.serialize((h, s, a)).map_err(|e| csv_error(path, e))?;
    }
    writer.flush().map_err(io_error(path))
}

pub(crate) fn csv_error(path: &Path, e: csv::Error) -> HarnessError {
    let line = e.position().map_or(0, |p| p.line() as usize);
    match e.into_kind() {
        csv::ErrorKind::Io(source) => HarnessError::Io { path: path.to_path_buf(), source },
        kind => HarnessError::Parse { path: path.to_path_buf(), line, message: format!("{kind:?}") },
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::{EngagementLevel, Outcome, NUM_ACTIONS, NUM_STATES};

    fn two_step_episode(id: u64) -> EpisodeTranscript {
        let s0 = TourState::fresh(TourName::Tools);
        let s1 = s0
            .apply_action(
                ActionId::DESCRIBE_TOUR,
                Outcome { engagement: EngagementLevel::Medium, termination: TerminalFlag::None },
            )
            .unwrap();
        let s2 = s1
            .apply_action(
                ActionId::goto(2),
                Outcome { engagement: EngagementLevel::Low, termination: TerminalFlag::Abandoned },
            )
            .unwrap();
        EpisodeTranscript {
            id,
            tour: TourName::Tools,
            steps: vec![
                Step {
                    h: 1,
                    state: s0,
                    action: ActionId::DESCRIBE_TOUR,
                    samples: vec![EngagementSample::new(0.0, 0.5), EngagementSample::new(1.0, 0.4)],
                    reward: 0.4123456789,
                    next_state: s1,
                },
                Step { h: 2, state: s1, action: ActionId::goto(2), samples: vec![], reward: 0.1, next_state: s2 },
            ],
            outcome: TerminalFlag::Abandoned,
        }
    }

    #[test]
    fn log_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("log.jsonl");
        let header = LogHeader { config_hash: "abc".into(), seed: 4, horizon: 20 };
        let mut w = EpisodeLogWriter::create(&path, Some(&header)).unwrap();
        let eps = vec![two_step_episode(0), two_step_episode(1)];
        for e in &eps {
            w.write_episode(e).unwrap();
        }
        drop(w);
        let (h, back) = read_episodes(&path).unwrap();
        assert_eq!(h, Some(header));
        assert_eq!(back, eps);
        let model = bootstrap(&path).unwrap();
        assert_eq!(model.total_transitions(), 4);
    }

    #[test]
    fn empty_log_gives_empty_model() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("log.jsonl");
        std::fs::write(&path, "").unwrap();
        let model = bootstrap(&path).unwrap();
        assert!(model.is_empty());
        assert_eq!(model.horizon(), DEFAULT_HORIZON);
    }

    #[test]
    fn parse_errors_carry_line_numbers() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("log.jsonl");
        let mut w = EpisodeLogWriter::create(&path, None).unwrap();
        w.write_episode(&two_step_episode(0)).unwrap();
        drop(w);
        let mut text = std::fs::read_to_string(&path).unwrap();
        text.push_str("{\"record\":\"step\",\"episode\":1}\n");
        std::fs::write(&path, text).unwrap();
        match bootstrap(&path) {
            Err(HarnessError::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn malformed_episode_is_reported_by_id() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("log.jsonl");
        let mut bad = two_step_episode(42);
        bad.steps[1].h = 7;
        let mut w = EpisodeLogWriter::create(&path, None).unwrap();
        w.write_episode(&two_step_episode(0)).unwrap();
        w.write_episode(&bad).unwrap();
        drop(w);
        assert!(matches!(bootstrap(&path), Err(HarnessError::MalformedEpisode { episode: 42, .. })));
    }

    #[test]
    fn split_episode_is_malformed() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("log.jsonl");
        let mut w = EpisodeLogWriter::create(&path, None).unwrap();
        w.write_episode(&two_step_episode(0)).unwrap();
        w.write_episode(&two_step_episode(1)).unwrap();
        w.write_episode(&two_step_episode(0)).unwrap();
        drop(w);
        assert!(matches!(read_episodes(&path), Err(HarnessError::MalformedEpisode { episode: 0, .. })));
    }

    #[test]
    fn snapshot_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("snap.jsonl");
        let mut m = TabularModel::new(20, NUM_STATES, NUM_ACTIONS);
        m.add(1, 4, 1, 8, 3).unwrap();
        m.add(20, 33788, 10, 33791, 1).unwrap();
        write_snapshot(&path, &m).unwrap();
        assert_eq!(read_snapshot(&path).unwrap(), m);
    }
}
