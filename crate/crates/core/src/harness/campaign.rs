use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};

use super::{
    bootstrap_from, compute_metrics, exploration_coverage, export, export_policy, io_error, read_episodes,
    write_snapshot, CoverageWindow, EpisodeLogWriter, ExperimentConfig, ExportFormat, HarnessError, LogHeader,
    MetricsReport, Mode, ReachableSet, WindowMetrics,
};
use crate::learner::{
    plan, plan_into, run_episode, update_model, Controller, EpisodeTranscript, StagePolicy, TabularModel, TourDomain,
};
use crate::rng::{derive_seed, stream_rng, Stream};
use crate::visitor::{sample_visitor, StaticController, VisitorSession};

/// Episode index offsets, so bootstrap and verification visitors never
/// coincide with campaign visitors.
const BOOTSTRAP_BASE: u64 = 1 << 40;
const VERIFICATION_BASE: u64 = 2 << 40;

#[derive(Debug, Clone)]
pub struct ReplicationOutcome {
    pub replication: usize,
    pub seed: u64,
    /// Campaign episodes, with exploration attached per window.
    pub report: MetricsReport,
    /// Coverage of the bootstrap snapshot followed by one entry per window.
    pub coverage: Vec<CoverageWindow>,
    /// Static episodes after the learning run, in verification mode.
    pub verification: Option<MetricsReport>,
    pub model: TabularModel,
    /// Last plan of a learning or verification run.
    pub policy: Option<StagePolicy>,
}

#[derive(Debug, Clone)]
pub struct CampaignOutcome {
    pub config_hash: String,
    pub replications: Vec<ReplicationOutcome>,
}

/// Run every replication of the configured campaign, spread over the
/// available cores. Replications share nothing but the read-only bootstrap
/// log, so results do not depend on scheduling. With an output
/// directory each replication writes, under `rep-NN/`, its episode logs
/// (flushed per episode), a model snapshot per window, the final policy and
/// the metrics in both export formats.
pub fn run_campaign(config: &ExperimentConfig) -> Result<CampaignOutcome, HarnessError> {
    config.validate()?;
    let config_hash = config.hash();
    let bootstrap_log = match &config.bootstrap_log {
        Some(path) => Some(read_episodes(path)?.1),
        None => None,
    };
    let workers = std::thread::available_parallelism().map_or(1, |n| n.get()).min(config.replications);
    let next = AtomicUsize::new(0);
    let mut results: Vec<(usize, Result<ReplicationOutcome, HarnessError>)> = std::thread::scope(|scope| {
        let handles: Vec<_> = (0..workers)
            .map(|_| {
                scope.spawn(|| {
                    let mut done = Vec::new();
                    loop {
                        let r = next.fetch_add(1, Ordering::Relaxed);
                        if r >= config.replications {
                            return done;
                        }
                        done.push((r, run_replication(config, &config_hash, r, bootstrap_log.as_deref())));
                    }
                })
            })
            .collect();
        handles.into_iter().flat_map(|h| h.join().expect("replication worker panicked")).collect()
    });
    results.sort_by_key(|(r, _)| *r);
    let replications = results.into_iter().map(|(_, outcome)| outcome).collect::<Result<_, _>>()?;
    Ok(CampaignOutcome { config_hash, replications })
}

struct Sink {
    dir: PathBuf,
    snapshots: PathBuf,
}

impl Sink {
    fn new(root: &Path, replication: usize) -> Result<Self, HarnessError> {
        let dir = root.join(format!("rep-{replication:02}"));
        let snapshots = dir.join("snapshots");
        std::fs::create_dir_all(&snapshots).map_err(io_error(&snapshots))?;
        Ok(Sink { dir, snapshots })
    }

    fn log(&self, name: &str, header: &LogHeader) -> Result<EpisodeLogWriter, HarnessError> {
        EpisodeLogWriter::create(&self.dir.join(name), Some(header))
    }

    fn snapshot(&self, index: usize, model: &TabularModel) -> Result<(), HarnessError> {
        write_snapshot(&self.snapshots.join(format!("window-{index:04}.jsonl")), model)
    }
}

fn simulate(
    config: &ExperimentConfig,
    seed: u64,
    index: u64,
    controller: &mut dyn Controller,
) -> Result<EpisodeTranscript, HarnessError> {
    let mut visitor_rng = stream_rng(seed, Stream::Visitor, index);
    let profile = sample_visitor(&config.visitor, &mut visitor_rng)?;
    let tour = config.visitor.sample_tour(&mut visitor_rng);
    let mut session = VisitorSession::new(profile, visitor_rng);
    let mut reward_rng = stream_rng(seed, Stream::Reward, index);
    Ok(run_episode(index, tour, config.horizon, controller, &mut session, &mut reward_rng)?)
}

fn static_controller(config: &ExperimentConfig, seed: u64, index: u64) -> StaticController<rand_chacha::ChaCha8Rng> {
    StaticController::new(config.request_probability, stream_rng(seed, Stream::StaticPolicy, index))
}

/// Collects episodes into windows as they finish.
struct WindowAccumulator {
    size: usize,
    pending: Vec<EpisodeTranscript>,
    windows: Vec<WindowMetrics>,
}

impl WindowAccumulator {
    fn new(size: usize) -> Self {
        WindowAccumulator { size, pending: Vec::with_capacity(size), windows: Vec::new() }
    }

    /// Returns true when the episode closed a window.
    fn push(&mut self, episode: EpisodeTranscript) -> bool {
        self.pending.push(episode);
        if self.pending.len() == self.size {
            self.close();
            true
        } else {
            false
        }
    }

    fn close(&mut self) {
        if self.pending.is_empty() {
            return;
        }
        let mut w = compute_metrics(&self.pending, self.size).windows.remove(0);
        w.window = self.windows.len();
        self.windows.push(w);
        self.pending.clear();
    }

    fn finish(mut self) -> MetricsReport {
        self.close();
        MetricsReport { window_size: self.size, windows: self.windows }
    }
}

fn run_replication(
    config: &ExperimentConfig,
    config_hash: &str,
    replication: usize,
    bootstrap_log: Option<&[EpisodeTranscript]>,
) -> Result<ReplicationOutcome, HarnessError> {
    let seed = derive_seed(config.seed, Stream::Replication, replication as u64);
    let header = LogHeader { config_hash: config_hash.to_string(), seed, horizon: config.horizon };
    let sink = config.output_dir.as_deref().map(|d| Sink::new(d, replication)).transpose()?;
    let domain = TourDomain::get();
    let planner = config.planner();
    let reachable;
    let reachable = if config.horizon == crate::learner::DEFAULT_HORIZON {
        ReachableSet::standard()
    } else {
        reachable = ReachableSet::new(config.horizon);
        &reachable
    };

    let mut model = match bootstrap_log {
        Some(episodes) => bootstrap_from(episodes, config.horizon)?,
        None => {
            let mut log = sink.as_ref().map(|s| s.log("bootstrap.jsonl", &header)).transpose()?;
            let mut model = bootstrap_from(&[], config.horizon)?;
            for i in 0..config.bootstrap_episodes as u64 {
                let index = BOOTSTRAP_BASE + i;
                let episode = simulate(config, seed, index, &mut static_controller(config, seed, index))?;
                update_model(&mut model, &episode)?;
                if let Some(log) = &mut log {
                    log.write_episode(&episode)?;
                }
            }
            model
        }
    };
    if let Some(s) = &sink {
        s.snapshot(0, &model)?;
    }
    let mut coverage = exploration_coverage(std::slice::from_ref(&model), reachable);
    let mut previous = model.clone();

    let learning = config.mode != Mode::Static;
    let mut policy = learning.then(|| plan(&model, domain, &planner));
    let mut log = sink.as_ref().map(|s| s.log("episodes.jsonl", &header)).transpose()?;
    let mut windows = WindowAccumulator::new(config.window);
    for i in 0..config.episodes as u64 {
        let episode = match &mut policy {
            Some(policy) => {
                plan_into(&model, domain, &planner, policy);
                simulate(config, seed, i, policy)?
            }
            None => simulate(config, seed, i, &mut static_controller(config, seed, i))?,
        };
        update_model(&mut model, &episode)?;
        if let Some(log) = &mut log {
            log.write_episode(&episode)?;
        }
        let last = i + 1 == config.episodes as u64;
        if windows.push(episode) || last {
            if last {
                windows.close();
            }
            let step = exploration_coverage(&[previous, model.clone()], reachable);
            coverage.push(step[1]);
            previous = model.clone();
            if let Some(s) = &sink {
                s.snapshot(coverage.len() - 1, &model)?;
            }
        }
    }
    let mut report = windows.finish();
    report.attach_exploration(&coverage[1..]);

    let verification = if config.mode == Mode::Verification {
        let mut log = sink.as_ref().map(|s| s.log("verification.jsonl", &header)).transpose()?;
        let mut windows = WindowAccumulator::new(config.window);
        for i in 0..config.verification_episodes as u64 {
            let index = VERIFICATION_BASE + i;
            let episode = simulate(config, seed, index, &mut static_controller(config, seed, index))?;
            if let Some(log) = &mut log {
                log.write_episode(&episode)?;
            }
            windows.push(episode);
        }
        Some(windows.finish())
    } else {
        None
    };

    if let Some(s) = &sink {
        if let Some(p) = &policy {
            export_policy(&s.dir.join("policy.csv"), p)?;
        }
        for format in [ExportFormat::Csv, ExportFormat::JsonLines] {
            export(&report, format, &s.dir, "metrics")?;
            if let Some(v) = &verification {
                export(v, format, &s.dir, "verification")?;
            }
        }
        write_coverage(&s.dir.join("coverage.csv"), &coverage)?;
    }

    Ok(ReplicationOutcome { replication, seed, report, coverage, verification, model, policy })
}

/// Simulate the static-policy episodes that seed replication 0 of `config`
/// and write them as an episode log. Bootstrapping from this log gives the
/// same model as the campaign's in-process bootstrap.
pub fn write_static_log(config: &ExperimentConfig, episodes: usize, path: &Path) -> Result<TabularModel, HarnessError> {
    config.validate()?;
    let seed = derive_seed(config.seed, Stream::Replication, 0);
    let header = LogHeader { config_hash: config.hash(), seed, horizon: config.horizon };
    let mut log = EpisodeLogWriter::create(path, Some(&header))?;
    let mut model = bootstrap_from(&[], config.horizon)?;
    for i in 0..episodes as u64 {
        let index = BOOTSTRAP_BASE + i;
        let episode = simulate(config, seed, index, &mut static_controller(config, seed, index))?;
        update_model(&mut model, &episode)?;
        log.write_episode(&episode)?;
    }
    Ok(model)
}

/// Write a coverage series as CSV.
pub fn write_coverage(path: &Path, coverage: &[CoverageWindow]) -> Result<(), HarnessError> {
    let mut w = csv::Writer::from_path(path).map_err(|e| super::log::csv_error(path, e))?;
    w.write_record(["snapshot", "new_pairs", "cumulative_pairs", "raw_fraction", "reachable_fraction"])
        .map_err(|e| super::log::csv_error(path, e))?;
    for (i, c) in coverage.iter().enumerate() {
        w.serialize((i, c.new_pairs, c.cumulative_pairs, c.raw_fraction, c.reachable_fraction))
            .map_err(|e| super::log::csv_error(path, e))?;
    }
    w.flush().map_err(io_error(path))
}
