mod common;

use common::{bootstrap_matches_tally, dir_bytes, proptest_config, random_episode, tally};
use proptest::prelude::*;
use tourguide_core::harness::{
    bootstrap, compute_metrics, exploration_coverage, export, import, read_snapshot, run_campaign, write_static_log,
    ExperimentConfig, ExportFormat, Mode, ReachableSet,
};
use tourguide_core::learner::TabularModel;

fn small_config(mode: Mode, seed: u64) -> ExperimentConfig {
    ExperimentConfig {
        mode,
        episodes: 120,
        verification_episodes: 30,
        bootstrap_episodes: 100,
        window: 40,
        seed,
        ..ExperimentConfig::default()
    }
}

#[test]
fn reachable_pairs_at_default_horizon() {
    assert_eq!(ReachableSet::standard().pairs(), 71_762);
}

#[test]
fn campaigns_are_byte_reproducible() {
    for mode in [Mode::Static, Mode::Learning, Mode::Verification] {
        let a = tempfile::tempdir().unwrap();
        let b = tempfile::tempdir().unwrap();
        for dir in [&a, &b] {
            let config = ExperimentConfig { output_dir: Some(dir.path().to_path_buf()), ..small_config(mode, 11) };
            run_campaign(&config).unwrap();
        }
        let (fa, fb) = (dir_bytes(a.path()), dir_bytes(b.path()));
        assert!(fa.len() > 5, "{mode}: only {} files", fa.len());
        assert_eq!(fa, fb, "{mode}");
    }
}

#[test]
fn different_seeds_give_different_logs() {
    let a = run_campaign(&small_config(Mode::Learning, 1)).unwrap();
    let b = run_campaign(&small_config(Mode::Learning, 2)).unwrap();
    assert_ne!(a.replications[0].model, b.replications[0].model);
}

#[test]
fn static_log_bootstrap_equals_in_process_bootstrap() {
    let dir = tempfile::tempdir().unwrap();
    let config = ExperimentConfig { episodes: 0, bootstrap_episodes: 300, ..ExperimentConfig::default() };
    let path = dir.path().join("static.jsonl");
    let written = write_static_log(&config, 300, &path).unwrap();
    let campaign = run_campaign(&config).unwrap();
    assert_eq!(bootstrap(&path).unwrap(), written);
    assert_eq!(campaign.replications[0].model, written);
}

#[test]
fn campaign_from_bootstrap_log_matches_generated_bootstrap() {
    let dir = tempfile::tempdir().unwrap();
    let base = small_config(Mode::Learning, 5);
    let log = dir.path().join("static.jsonl");
    write_static_log(&base, base.bootstrap_episodes, &log).unwrap();
    let from_log = run_campaign(&ExperimentConfig { bootstrap_log: Some(log), ..base.clone() }).unwrap();
    let generated = run_campaign(&base).unwrap();
    assert_eq!(from_log.replications[0].report, generated.replications[0].report);
}

#[test]
fn snapshots_give_monotone_coverage() {
    let dir = tempfile::tempdir().unwrap();
    let config = ExperimentConfig { output_dir: Some(dir.path().to_path_buf()), ..small_config(Mode::Learning, 3) };
    let outcome = run_campaign(&config).unwrap();
    let snapshot_dir = dir.path().join("rep-00/snapshots");
    let mut paths: Vec<_> = std::fs::read_dir(&snapshot_dir).unwrap().map(|e| e.unwrap().path()).collect();
    paths.sort();
    let models: Vec<TabularModel> = paths.iter().map(|p| read_snapshot(p).unwrap()).collect();
    assert_eq!(models.len(), 1 + 3);
    let coverage = exploration_coverage(&models, ReachableSet::standard());
    assert_eq!(coverage, outcome.replications[0].coverage);
    assert_eq!(coverage[0].new_pairs, models[0].explored_count() as u64);
    for w in coverage.windows(2) {
        assert!(w[1].cumulative_pairs >= w[0].cumulative_pairs);
        assert!(w[1].reachable_fraction >= w[0].reachable_fraction);
    }
    let repeated = exploration_coverage(&[models[1].clone(), models[1].clone()], ReachableSet::standard());
    assert_eq!(repeated[1].new_pairs, 0);
}

#[test]
fn bootstrap_of_a_thousand_static_episodes_matches_tally() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("static.jsonl");
    let config = ExperimentConfig::default();
    let model = write_static_log(&config, 1000, &path).unwrap();
    let (_, episodes) = tourguide_core::harness::read_episodes(&path).unwrap();
    let got: std::collections::BTreeMap<_, _> = model.entries().map(|(h, s, a, n, c)| ((h, s, a, n), c)).collect();
    assert_eq!(got, tally(&episodes));
}

proptest! {
    #![proptest_config(proptest_config(64))]

    #[test]
    fn bootstrap_matches_tally_on_random_logs(seeds in prop::collection::vec(any::<u64>(), 0..20)) {
        let episodes: Vec<_> = seeds.iter().enumerate().map(|(i, &s)| random_episode(s, i as u64, 20)).collect();
        let dir = tempfile::tempdir().unwrap();
        prop_assert_eq!(bootstrap_matches_tally(&episodes, dir.path()), Ok(()));
    }

    #[test]
    fn metrics_ignore_order_within_a_window(
        seeds in prop::collection::vec(any::<u64>(), 1..30),
        window in 1usize..12,
        shuffle in any::<u64>(),
    ) {
        use rand::seq::SliceRandom;
        use rand::SeedableRng;
        let episodes: Vec<_> = seeds.iter().enumerate().map(|(i, &s)| random_episode(s, i as u64, 20)).collect();
        let mut permuted = episodes.clone();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(shuffle);
        for chunk in permuted.chunks_mut(window) {
            chunk.shuffle(&mut rng);
        }
        prop_assert_eq!(compute_metrics(&episodes, window), compute_metrics(&permuted, window));
    }

    #[test]
    fn exports_round_trip(
        seeds in prop::collection::vec(any::<u64>(), 0..25),
        window in 1usize..10,
        jsonl in any::<bool>(),
    ) {
        let episodes: Vec<_> = seeds.iter().enumerate().map(|(i, &s)| random_episode(s, i as u64, 20)).collect();
        let report = compute_metrics(&episodes, window);
        let format = if jsonl { ExportFormat::JsonLines } else { ExportFormat::Csv };
        let dir = tempfile::tempdir().unwrap();
        export(&report, format, dir.path(), "m").unwrap();
        prop_assert_eq!(import(format, dir.path(), "m").unwrap(), report);
    }
}

#[test]
fn identical_episodes_aggregate_like_one() {
    let e = random_episode(9, 0, 20);
    let one = compute_metrics(std::slice::from_ref(&e), 100);
    let many = compute_metrics(&vec![e; 100], 100);
    let (a, b) = (&one.windows[0], &many.windows[0]);
    assert_eq!(a.mean_stops, b.mean_stops);
    assert_eq!(a.completion_rate, b.completion_rate);
    assert!((a.mean_engagement.unwrap() - b.mean_engagement.unwrap()).abs() < 1e-12);
    assert_eq!(a.deltas.fractions(), b.deltas.fractions());
}

#[test]
fn replications_come_back_in_order_with_distinct_seeds() {
    let config = ExperimentConfig {
        replications: 3,
        episodes: 20,
        bootstrap_episodes: 20,
        window: 10,
        ..small_config(Mode::Learning, 8)
    };
    let outcome = run_campaign(&config).unwrap();
    let ids: Vec<usize> = outcome.replications.iter().map(|r| r.replication).collect();
    assert_eq!(ids, [0, 1, 2]);
    let seeds: std::collections::HashSet<u64> = outcome.replications.iter().map(|r| r.seed).collect();
    assert_eq!(seeds.len(), 3);
    let again = run_campaign(&config).unwrap();
    for (a, b) in outcome.replications.iter().zip(&again.replications) {
        assert_eq!(a.report, b.report);
        assert_eq!(a.model, b.model);
    }
}
