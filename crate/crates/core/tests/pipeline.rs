//! End-to-end experiment on a small synthetic dataset.

use crossrec::data::{generate_synthetic, SyntheticConfig};
use crossrec::metrics::TABLE_METRICS;
use crossrec::pipeline::{analyze, run_experiment, ExperimentConfig, ModelKind};
use crossrec::ranker::RankerConfig;

fn small() -> (crossrec::data::Dataset, ExperimentConfig) {
    let ds = generate_synthetic(&SyntheticConfig {
        n_users: 300,
        n_tracks: 300,
        n_podcasts: 30,
        n_playlists: 300,
        ..SyntheticConfig::default()
    })
    .unwrap();
    let cfg = ExperimentConfig {
        ranker: RankerConfig { epochs: 3, ..RankerConfig::desk() },
        bootstrap_resamples: 50,
        ..ExperimentConfig::default()
    };
    (ds, cfg)
}

#[test]
fn full_roster_produces_bounded_metrics_and_analyses() {
    let (ds, cfg) = small();
    let run = run_experiment(&ds, &cfg, None).unwrap();
    assert_eq!(run.report.models.len(), ModelKind::ALL.len());
    for m in &run.report.models {
        assert_eq!(m.users.len(), run.prepared.test.len());
        for metric in TABLE_METRICS {
            let v = m.mean(metric).unwrap();
            assert!((0.0..=1.0).contains(&v), "{} {metric:?} = {v}", m.model);
        }
    }
    let csv = run.report.to_csv();
    assert_eq!(csv.lines().count(), 1 + ModelKind::ALL.len());

    let a = analyze(&run.models, &run.report, &ds, &run.prepared, &cfg).unwrap();
    for kind in ModelKind::ALL {
        let hist = a.popularity.histogram(kind.name()).unwrap();
        assert!(hist.iter().sum::<u64>() > 0);
    }
    assert!(!a.cohorts.is_empty());
}

#[test]
fn experiment_is_deterministic_with_one_worker() {
    let (ds, mut cfg) = small();
    cfg.roster = vec![ModelKind::DemoPopularity, ModelKind::DemoCfMetadata];
    cfg.ranker.workers = 1;
    cfg.skipgram.workers = 1;
    let a = run_experiment(&ds, &cfg, None).unwrap();
    let b = run_experiment(&ds, &cfg, None).unwrap();
    assert_eq!(a.report, b.report);
}
