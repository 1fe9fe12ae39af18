use hawkesnet::estimation::Stage1Options;
use hawkesnet::experiments::*;
use hawkesnet::manifest::RunManifest;

fn small(reps: usize) -> StudyConfig {
    StudyConfig {
        replications: reps,
        omega: StudyOmega::Explicit { omega: vec![0.01; 10] },
        stage1: Stage1Options { restarts: 2, max_evals: 200, ..Stage1Options::default() },
        seed: 11,
        ..StudyConfig::default()
    }
}

fn close(a: f64, b: f64) -> bool {
    (a.is_nan() && b.is_nan()) || (a - b).abs() <= 1e-12 * b.abs().max(1.0)
}

#[test]
fn single_replication_has_degenerate_spread() {
    let r = run_study(&small(1)).unwrap();
    assert_eq!(r.records.len(), 1);
    for row in r.metrics.theta.iter().chain(&r.metrics.alpha) {
        assert_eq!(row.n, 1);
        assert_eq!(row.sd, 0.0);
        assert_eq!(row.mad, 0.0);
    }
    for c in &r.metrics.confusion {
        assert_eq!(c.tp + c.fn_ + c.fp + c.tn, 100.0);
    }
}

#[test]
fn report_round_trips_and_reproduces() {
    let cfg = small(3);
    let a = run_study(&cfg).unwrap();
    let b = run_study(&cfg).unwrap();
    let (da, db) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let fa = emit_report(&a, da.path(), RunManifest::start("bench", &cfg, cfg.seed).unwrap()).unwrap();
    emit_report(&b, db.path(), RunManifest::start("bench", &cfg, cfg.seed).unwrap()).unwrap();
    for name in TABLES {
        let rel = format!("tables/{name}.csv");
        assert_eq!(std::fs::read(da.path().join(&rel)).unwrap(), std::fs::read(db.path().join(&rel)).unwrap(), "{name}");
    }
    assert!(fa.manifest.verify_outputs(da.path()).unwrap().is_empty());
    assert!(da.path().join("raw/rep_0.json").exists() && da.path().join("manifest.json").exists());

    let back = read_tables(da.path()).unwrap();
    let m = &a.metrics;
    assert_eq!(back.theta.len(), m.theta.len());
    for (x, y) in back.theta.iter().chain(&back.edges).chain(&back.alpha).zip(m.theta.iter().chain(&m.edges).chain(&m.alpha)) {
        assert_eq!((&x.scenario, &x.parameter, x.n), (&y.scenario, &y.parameter, y.n));
        for (u, v) in [(x.mean_bias, y.mean_bias), (x.median_bias, y.median_bias), (x.sd, y.sd), (x.mad, y.mad), (x.rmse, y.rmse)] {
            assert!(close(u, v));
        }
    }
    assert_eq!(back.confusion, m.confusion);
    assert_eq!(back.detection, m.detection);
    assert_eq!(back.histograms, m.histograms);
    assert_eq!(back.failures, m.failures);

    let (cfg2, truth2, _, records) = load_study(da.path()).unwrap();
    assert_eq!(cfg2, cfg);
    assert_eq!(records, a.records);
    assert_eq!(compute_metrics(&cfg2, &truth2, &records).confusion, m.confusion);
}

#[test]
fn rmse_identity_per_row() {
    let r = run_study(&small(3)).unwrap();
    for row in r.metrics.theta.iter().chain(&r.metrics.edges).chain(&r.metrics.alpha) {
        let n = row.n as f64;
        let rhs = row.mean_bias.powi(2) + row.sd.powi(2) * (n - 1.0) / n;
        assert!((row.rmse.powi(2) - rhs).abs() <= 1e-10 * rhs.max(1.0), "{row:?}");
    }
}

#[test]
fn histogram_range_and_bins() {
    let r = run_study(&small(2)).unwrap();
    let beta: Vec<_> = r.metrics.histograms.iter().filter(|h| h.quantity == "beta_bar").collect();
    assert_eq!(beta.len(), HIST_BINS);
    assert_eq!((beta[0].bin_lo, beta[HIST_BINS - 1].bin_hi), (-3.0, 3.0));
    assert_eq!(beta.iter().map(|h| h.count).sum::<usize>() + beta[0].outside, 2);
}

#[test]
fn rejects_invalid_configs() {
    assert!(run_study(&StudyConfig { scenarios: vec![], ..small(1) }).is_err());
    assert!(run_study(&StudyConfig { replications: 0, ..small(1) }).is_err());
    assert!(run_study(&StudyConfig { omega: StudyOmega::Explicit { omega: vec![0.1; 3] }, ..small(1) }).is_err());
}

#[test]
fn slim_scenario_ignores_covariates() {
    let cfg = StudyConfig { scenarios: vec![Scenario::SlimStage1], ..small(1) };
    let a = run_study(&cfg).unwrap();
    assert!(a.records[0].slim.is_some() && a.records[0].full.is_none());
    assert_eq!(a.metrics.failures[0].failed, 0);
}
