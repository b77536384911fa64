//! `tourguide`: run and analyse tour-guide learning campaigns.
//!
//! Exit codes: 0 success, 2 bad usage or configuration, 3 I/O failure,
//! 4 unparsable or malformed data, 5 learner failure.

use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use tourguide_core::harness::{
    self, bootstrap, compute_metrics, exploration_coverage, export, read_episodes, read_snapshot,
    simulate_future_exploration, write_coverage, write_snapshot, write_static_log, ExperimentConfig, ExportFormat,
    HarnessError, MetricsReport, Mode, ReachableSet,
};
use tourguide_core::learner::{plan, BackupSet, TourDomain};
use tourguide_core::rng::{stream_rng, Stream};

/// `println!` that exits quietly once stdout is gone (e.g. piped to `head`).
macro_rules! out {
    ($($arg:tt)*) => {
        if writeln!(std::io::stdout(), $($arg)*).is_err() {
            std::process::exit(0);
        }
    };
}

#[derive(Parser)]
#[command(name = "tourguide", version, about = "Engagement-driven UCBVI campaigns for a museum tour-guide robot")]
struct Cli {
    /// Experiment configuration (TOML). Defaults apply to missing keys.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Base seed for every random stream; overrides the config.
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Build a model snapshot from a static-policy episode log.
    Bootstrap {
        /// Episode log to read (and to write with --generate).
        #[arg(long)]
        log: PathBuf,
        /// Simulate this many static-policy episodes into the log first.
        #[arg(long)]
        generate: Option<usize>,
        /// Where to write the model snapshot.
        #[arg(long)]
        out: PathBuf,
    },
    /// Run a campaign.
    Run(RunArgs),
    /// Print per-window metrics of an episode log.
    Metrics {
        #[arg(long)]
        log: PathBuf,
        #[arg(long)]
        window: Option<usize>,
    },
    /// Print exploration coverage across a directory of model snapshots.
    Coverage {
        /// Directory of `*.jsonl` snapshots, taken in file-name order.
        #[arg(long)]
        snapshots: PathBuf,
        /// Also write the series as CSV.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Project future exploration from a model snapshot.
    Project {
        #[arg(long)]
        snapshot: PathBuf,
        #[arg(long, default_value_t = 5)]
        windows: usize,
        #[arg(long)]
        window: Option<usize>,
        /// Independent projections to average.
        #[arg(long, default_value_t = 8)]
        runs: usize,
    },
    /// Export the metrics of an episode log.
    Export {
        #[arg(long)]
        log: PathBuf,
        #[arg(long, default_value = "csv")]
        format: String,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value = "metrics")]
        stem: String,
        #[arg(long)]
        window: Option<usize>,
    },
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    mode: Option<String>,
    #[arg(long)]
    episodes: Option<usize>,
    #[arg(long)]
    replications: Option<usize>,
    #[arg(long)]
    window: Option<usize>,
    #[arg(long)]
    horizon: Option<usize>,
    #[arg(long)]
    sigma: Option<f64>,
    #[arg(long)]
    optimistic_init: bool,
    /// Back values up over every action instead of the feasible set.
    #[arg(long)]
    all_actions_backup: bool,
    #[arg(long)]
    bootstrap_log: Option<PathBuf>,
    #[arg(long)]
    bootstrap_episodes: Option<usize>,
    /// Output directory for logs, snapshots and exports.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn load_config(cli: &Cli) -> Result<ExperimentConfig, HarnessError> {
    let mut config = match &cli.config {
        Some(path) => ExperimentConfig::load(path)?,
        None => ExperimentConfig::default(),
    };
    if let Some(seed) = cli.seed {
        config.seed = seed;
    }
    Ok(config)
}

fn apply_run_args(config: &mut ExperimentConfig, args: &RunArgs) -> Result<(), HarnessError> {
    if let Some(m) = &args.mode {
        config.mode = m.parse::<Mode>()?;
    }
    macro_rules! set {
        ($($field:ident),*) => { $(if let Some(v) = args.$field.clone() { config.$field = v; })* };
    }
    set!(episodes, replications, window, horizon, sigma, bootstrap_episodes);
    if args.optimistic_init {
        config.optimistic_init = true;
    }
    if args.all_actions_backup {
        config.backup = BackupSet::AllActions;
    }
    if let Some(p) = &args.bootstrap_log {
        config.bootstrap_log = Some(p.clone());
    }
    if let Some(p) = &args.out {
        config.output_dir = Some(p.clone());
    }
    Ok(())
}

fn print_report(report: &MetricsReport) {
    out!("window  tours  stops  completion  engagement  stable  new_pairs  cumulative");
    for w in &report.windows {
        let engagement = w.mean_engagement.map_or("-".into(), |m| format!("{m:.3}"));
        let stable = w.deltas.fractions().map_or("-".into(), |f| format!("{:.3}", f[1]));
        let (new, cum) = w
            .exploration
            .map_or(("-".into(), "-".into()), |e| (e.new_pairs.to_string(), e.cumulative_pairs.to_string()));
        out!(
            "{:>6}  {:>5}  {:>5.2}  {:>10.3}  {:>10}  {:>6}  {:>9}  {:>10}",
            w.window,
            w.tours,
            w.mean_stops,
            w.completion_rate,
            engagement,
            stable,
            new,
            cum
        );
    }
}

fn log_metrics(path: &Path, window: Option<usize>, config: &ExperimentConfig) -> Result<MetricsReport, HarnessError> {
    let window = window.unwrap_or(config.window);
    if window == 0 {
        return Err(HarnessError::Config("window must be at least 1".into()));
    }
    let (_, episodes) = read_episodes(path)?;
    for e in &episodes {
        e.validate(config.horizon)?;
    }
    Ok(compute_metrics(&episodes, window))
}

fn run(cli: Cli) -> Result<(), HarnessError> {
    let mut config = load_config(&cli)?;
    match cli.command {
        Command::Bootstrap { log, generate, out } => {
            if let Some(n) = generate {
                write_static_log(&config, n, &log)?;
            }
            let model = bootstrap(&log)?;
            write_snapshot(&out, &model)?;
            out!(
                "{} transitions, {} explored (h, s, a) pairs -> {}",
                model.total_transitions(),
                model.explored_count(),
                out.display()
            );
        }
        Command::Run(args) => {
            apply_run_args(&mut config, &args)?;
            let outcome = harness::run_campaign(&config)?;
            out!("config {} mode {}", outcome.config_hash, config.mode);
            for rep in &outcome.replications {
                out!("replication {} (seed {})", rep.replication, rep.seed);
                print_report(&rep.report);
                if let Some(v) = &rep.verification {
                    out!("verification");
                    print_report(v);
                }
            }
        }
        Command::Metrics { log, window } => print_report(&log_metrics(&log, window, &config)?),
        Command::Coverage { snapshots, out } => {
            let mut paths: Vec<PathBuf> = std::fs::read_dir(&snapshots)
                .map_err(|source| HarnessError::Io { path: snapshots.clone(), source })?
                .filter_map(|e| e.ok().map(|e| e.path()))
                .filter(|p| p.extension().is_some_and(|x| x == "jsonl"))
                .collect();
            paths.sort();
            let models = paths.iter().map(|p| read_snapshot(p)).collect::<Result<Vec<_>, _>>()?;
            let horizon = models.first().map_or(config.horizon, |m| m.horizon());
            let reachable = ReachableSet::new(horizon);
            let coverage = exploration_coverage(&models, &reachable);
            out!("reachable pairs {}", reachable.pairs());
            out!("snapshot  new_pairs  cumulative  raw_fraction  reachable_fraction");
            for (p, c) in paths.iter().zip(&coverage) {
                out!(
                    "{:<8}  {:>9}  {:>10}  {:>12.6}  {:>18.4}",
                    p.file_stem().unwrap_or_default().to_string_lossy(),
                    c.new_pairs,
                    c.cumulative_pairs,
                    c.raw_fraction,
                    c.reachable_fraction
                );
            }
            if let Some(out) = out {
                write_coverage(&out, &coverage)?;
            }
        }
        Command::Project { snapshot, windows, window, runs } => {
            if runs == 0 {
                return Err(HarnessError::Config("runs must be at least 1".into()));
            }
            let model = read_snapshot(&snapshot)?;
            let planner = config.planner();
            let policy = plan(&model, TourDomain::get(), &planner);
            let mut rng = stream_rng(config.seed, Stream::Projection, 0);
            let window = window.unwrap_or(config.window);
            let curve = simulate_future_exploration(&model, &policy, &planner, windows, window, runs, &mut rng)?;
            for (i, n) in curve.iter().enumerate() {
                out!("window {} new_pairs {n:.1}", i + 1);
            }
        }
        Command::Export { log, format, out, stem, window } => {
            let format: ExportFormat = format.parse()?;
            let report = log_metrics(&log, window, &config)?;
            for path in export(&report, format, &out, &stem)? {
                out!("{}", path.display());
            }
        }
    }
    Ok(())
}

fn exit_code(e: &HarnessError) -> u8 {
    match e {
        HarnessError::Config(_) => 2,
        HarnessError::Io { .. } => 3,
        HarnessError::Parse { .. } | HarnessError::MalformedEpisode { .. } => 4,
        HarnessError::Learner(_) => 5,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
