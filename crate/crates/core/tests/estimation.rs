mod common;

use common::lasso_oracle::{cd_solve, objective};
use common::{integrate_pieces, breakpoints, jacobi_eigenvalues, nu_direct, random_instance};
use hawkesnet::estimation::*;
use hawkesnet::lasso::RowOptions;
use hawkesnet::stats::{ls_total, ls_value};
use hawkesnet::{CovariateField, EventLog, HawkesParams, Horizon, KernelSpec, Theta};
use nalgebra::{DMatrix, DVector};

fn toy(seed: u64, t: f64) -> (EventLog, CovariateField, HawkesParams) {
    random_instance(seed, 3, KernelSpec::untruncated(1.2).unwrap(), t)
}

fn quick_opts() -> Stage1Options {
    Stage1Options { restarts: 2, max_evals: 300, ..Stage1Options::default() }
}

#[test]
fn debias_identity_mock_subtracts_score() {
    let l = Layout::new(1, 2);
    let d = l.dim();
    let score = DVector::from_fn(d, |k, _| 0.1 * (k as f64 + 1.0) - 0.35);
    let th = Theta::new(vec![0.7], 1.3);
    let r = debias_theta(&DMatrix::identity(d, d), &score, &th, l, 20.0, SigmaRule::default()).unwrap();
    assert_eq!(r.theta_bar.beta[0], 0.7 - score[0]);
    assert_eq!(r.theta_bar.gamma, 1.3 - score[1]);
    assert_eq!(r.realized, 0.0);
}

#[test]
fn debias_diagonal_mock_uses_exact_inverse() {
    let l = Layout::new(1, 2);
    let d = l.dim();
    let diag: Vec<f64> = (0..d).map(|k| [2.0, 4.0, 0.5, 8.0][k % 4]).collect();
    let sigma = DMatrix::from_diagonal(&DVector::from_vec(diag.clone()));
    let score = DVector::from_fn(d, |k, _| (k as f64).sin());
    let th = Theta::new(vec![-0.2], 0.9);
    let r = debias_theta(&sigma, &score, &th, l, 50.0, SigmaRule::default()).unwrap();
    assert_eq!(r.theta_bar.beta[0], -0.2 - score[0] / diag[0]);
    assert_eq!(r.theta_bar.gamma, 0.9 - score[1] / diag[1]);
}

#[test]
fn debias_rejects_dimension_mismatch() {
    let l = Layout::new(1, 2);
    let th = Theta::new(vec![0.0], 1.0);
    assert!(debias_theta(&DMatrix::identity(3, 3), &DVector::zeros(3), &th, l, 1.0, SigmaRule::default()).is_err());
}

#[test]
fn profile_value_is_mean_of_row_objectives() {
    let (ev, cov, _) = toy(1, 40.0);
    let data = FitData::new(&ev, &cov, Horizon::Infinite).unwrap();
    let omega = [0.02, 0.05, 0.01];
    for th in [Theta::new(vec![0.3], 0.8), Theta::new(vec![-1.0], 2.5)] {
        let pr = profile_at(&data, &th, &omega, RowOptions::default()).unwrap();
        let st = data.stats(&th).unwrap();
        let direct: f64 = (0..3)
            .map(|i| ls_value(&st, &pr.rows[i].c, pr.rows[i].alpha, i).unwrap() / 40.0 + 2.0 * omega[i] * pr.rows[i].c.iter().sum::<f64>())
            .sum::<f64>()
            / 3.0;
        assert!((pr.value - direct).abs() <= 1e-10 * direct.abs().max(1.0));
        assert!((profile_criterion(&data, &th, &omega, 1e-8).unwrap() - pr.value).abs() <= 1e-10 * direct.abs().max(1.0));
    }
}

#[test]
fn no_events_gives_baseline_only_profile() {
    let ev = EventLog::empty(3, 10.0).unwrap();
    let cov = CovariateField::zeros(3, 1, 10.0).unwrap();
    let data = FitData::new(&ev, &cov, Horizon::Infinite).unwrap();
    let pr = profile_at(&data, &Theta::new(vec![0.5], 1.0), &[0.1; 3], RowOptions::default()).unwrap();
    assert!(pr.rows.iter().all(|r| r.c.iter().all(|&c| c == 0.0) && r.alpha == 0.0));
    assert_eq!(pr.value, 0.0);
}

#[test]
fn rows_match_coordinate_descent_oracle() {
    let (ev, cov, params) = toy(2, 30.0);
    let data = FitData::new(&ev, &cov, Horizon::Infinite).unwrap();
    let st = data.stats(&params.theta()).unwrap();
    let t = 30.0;
    let omega = [0.03, 0.0, 0.2];
    let pr = profile_at(&data, &params.theta(), &omega, RowOptions::default()).unwrap();
    for i in 0..3 {
        let q: Vec<Vec<f64>> = (0..4)
            .map(|r| {
                (0..4)
                    .map(|c| match (r, c) {
                        (0, 0) => st.v_diag[i],
                        (0, c) => st.g[(i, c - 1)],
                        (r, 0) => st.g[(i, r - 1)],
                        (r, c) => st.gram[(r - 1, c - 1)],
                    })
                    .collect()
            })
            .collect();
        let b: Vec<f64> = std::iter::once(st.v[i]).chain((0..3).map(|j| st.a[(i, j)])).collect();
        let w = [0.0, t * omega[i], t * omega[i], t * omega[i]];
        let x = cd_solve(&q, &b, &w, &[true; 4]);
        let oracle = objective(&q, &b, &w, &x) / t;
        let row = &pr.rows[i];
        assert!(row.monotone);
        assert!((row.objective - oracle).abs() <= 1e-8 * oracle.abs().max(1.0), "row {i}: {} vs {oracle}", row.objective);
        // the true row is feasible, so it cannot beat the minimizer
        let truth_c: Vec<f64> = params.c.row(i).iter().copied().collect();
        let truth = ls_value(&st, &truth_c, params.alpha[i], i).unwrap() / t + 2.0 * omega[i] * truth_c.iter().sum::<f64>();
        assert!(row.objective <= truth + 1e-12);
    }
}

#[test]
fn joint_objective_separates_by_node() {
    let (ev, cov, params) = toy(3, 30.0);
    let data = FitData::new(&ev, &cov, Horizon::Infinite).unwrap();
    let omega = [0.01, 0.04, 0.02];
    let th = params.theta();
    let pr = profile_at(&data, &th, &omega, RowOptions::default()).unwrap();
    let st = data.stats(&th).unwrap();
    let (c, alpha) = (pr.c(), pr.alpha());
    let joint = ls_total(&st, &c, &alpha).unwrap() / (3.0 * 30.0) + 2.0 * (0..3).map(|i| omega[i] * c.row(i).sum()).sum::<f64>() / 3.0;
    assert!((joint - pr.value).abs() <= 1e-10 * joint.abs().max(1.0));
}

#[test]
fn stage1_descends_from_the_truth() {
    let (ev, cov, params) = toy(4, 60.0);
    let data = FitData::new(&ev, &cov, Horizon::Infinite).unwrap();
    let omega = [0.02; 3];
    let start = params.theta();
    let at_start = profile_criterion(&data, &start, &omega, 1e-4).unwrap();
    let r = stage1_fit_from(&data, &omega, &quick_opts(), std::slice::from_ref(&start)).unwrap();
    assert!(r.criterion <= at_start + 1e-12);
    assert!(r.alpha.iter().all(|&a| a >= 0.0) && r.c.iter().all(|&c| c >= 0.0));
    assert!(quick_opts().theta_box.contains(&r.theta));
}

#[test]
fn stage3_at_stage1_theta_reproduces_rows() {
    let (ev, cov, _) = toy(5, 50.0);
    let data = FitData::new(&ev, &cov, Horizon::Infinite).unwrap();
    let omega = [0.02; 3];
    let opts = quick_opts();
    let s1 = stage1_fit(&data, &omega, &opts).unwrap();
    let s3 = stage3_fit(&data, &s1.theta, &omega, &opts.theta_box, opts.row_options(opts.tol1)).unwrap();
    assert!(!s3.clipped);
    assert!((&s3.c - &s1.c).amax() <= 1e-6);
    for (a, b) in s3.alpha.iter().zip(&s1.alpha) {
        assert!((a - b).abs() <= 1e-6);
    }
}

#[test]
fn stage3_clips_and_records() {
    let (ev, cov, _) = toy(6, 20.0);
    let data = FitData::new(&ev, &cov, Horizon::Infinite).unwrap();
    let b = ThetaBox::default();
    let s3 = stage3_fit(&data, &Theta::new(vec![12.0], 0.01), &[0.05; 3], &b, RowOptions::default()).unwrap();
    assert!(s3.clipped);
    assert_eq!(s3.theta, Theta::new(vec![10.0], 0.1));
    assert!(stage3_fit(&data, &Theta::new(vec![f64::NAN], 1.0), &[0.05; 3], &b, RowOptions::default()).is_err());
}

#[test]
fn debias_bound_holds_after_a_fit() {
    let (ev, cov, _) = toy(7, 80.0);
    let data = FitData::new(&ev, &cov, Horizon::Infinite).unwrap();
    let s1 = stage1_fit(&data, &[0.02; 3], &quick_opts()).unwrap();
    let d = stage2_debias(&s1, &data, SigmaRule::default()).unwrap();
    assert!(d.rows.iter().all(|r| !r.flagged));
    assert!(d.realized <= d.max_bound + 1e-8, "{} > {}", d.realized, d.max_bound);
    for r in &d.rows {
        assert!(r.realized <= r.bound + 1e-8);
    }
}

#[test]
fn compatibility_matches_jacobi_oracle() {
    let (ev, cov, params) = toy(8, 30.0);
    let data = FitData::new(&ev, &cov, Horizon::Infinite).unwrap();
    let st = data.stats(&params.theta()).unwrap();
    for i in 0..3 {
        let m: Vec<Vec<f64>> = (0..4)
            .map(|r| {
                (0..4)
                    .map(|c| {
                        (match (r, c) {
                            (0, 0) => st.v_diag[i],
                            (0, c) => st.g[(i, c - 1)],
                            (r, 0) => st.g[(i, r - 1)],
                            (r, c) => st.gram[(r - 1, c - 1)],
                        }) / 30.0
                    })
                    .collect()
            })
            .collect();
        let oracle = jacobi_eigenvalues(&m).into_iter().fold(f64::INFINITY, f64::min);
        let got = compatibility_diagnostic(&st, i).unwrap();
        assert!((got - oracle).abs() <= 1e-10, "{got} vs {oracle}");
        assert!(got >= -1e-10);
    }
}

#[test]
fn compatibility_is_zero_with_an_eventless_node() {
    let (ev, cov, params) = toy(9, 20.0);
    let mut times = ev.nodes().to_vec();
    times[2].clear();
    let ev = EventLog::new(20.0, times).unwrap();
    let data = FitData::new(&ev, &cov, Horizon::Infinite).unwrap();
    let st = data.stats(&params.theta()).unwrap();
    assert!(compatibility_diagnostic(&st, 2).unwrap().abs() <= 1e-12);
}

#[test]
fn residuals_for_empty_and_poisson_cases() {
    let ev = EventLog::empty(2, 5.0).unwrap();
    let cov = CovariateField::zeros(2, 1, 5.0).unwrap();
    let p = HawkesParams::new(DMatrix::zeros(2, 2), vec![0.0; 2], vec![0.3], KernelSpec::untruncated(1.0).unwrap()).unwrap();
    assert_eq!(residual_check(&ev, &cov, &p).unwrap(), vec![0.0, 0.0]);

    let (ev, cov, mut params) = toy(10, 15.0);
    params.c = DMatrix::zeros(3, 3);
    let r = residual_check(&ev, &cov, &params).unwrap();
    let br = breakpoints(&ev, &cov, f64::INFINITY);
    for i in 0..3 {
        let comp = params.alpha[i] * integrate_pieces(&|t| nu_direct(&cov, i, &params.beta, t), 0.0, 15.0, &br, 1e-13);
        assert!((r[i] - (ev.node(i).len() as f64 - comp)).abs() <= 1e-9);
    }
}

#[test]
fn single_round_cv_returns_theory_omega() {
    let (ev, cov, _) = toy(11, 40.0);
    let data = FitData::new(&ev, &cov, Horizon::Infinite).unwrap();
    let cv = CvOptions { iterations: 1, ..CvOptions::default() };
    let r = cross_validate(&data, &cv, &quick_opts(), &TuningConstants::default()).unwrap();
    assert_eq!(r.omega, r.theory.omega);
    assert_eq!(r.rounds.len(), 1);
    let bad = CvOptions { split_fraction: 1.0, ..CvOptions::default() };
    assert!(cross_validate(&data, &bad, &quick_opts(), &TuningConstants::default()).is_err());
}

#[test]
fn cv_picks_the_per_node_argmin() {
    let (ev, cov, _) = toy(12, 60.0);
    let data = FitData::new(&ev, &cov, Horizon::Infinite).unwrap();
    let cv = CvOptions { iterations: 4, ..CvOptions::default() };
    let r = cross_validate(&data, &cv, &quick_opts(), &TuningConstants::default()).unwrap();
    for i in 0..3 {
        let best = r.rounds.iter().min_by(|a, b| a.test_ls[i].total_cmp(&b.test_ls[i])).unwrap();
        assert_eq!(r.omega[i], best.omega[i]);
        assert!(r.rounds.iter().all(|rd| rd.omega[i] > 0.0));
    }
}

#[test]
fn full_pipeline_report() {
    let (ev, cov, _) = toy(13, 60.0);
    let cfg = FitConfig { omega: OmegaSource::Explicit { omega: vec![0.02; 3] }, stage1: quick_opts(), ..FitConfig::default() };
    let rep = fit(&ev, &cov, &cfg).unwrap();
    assert!(rep.debias.is_some() && rep.stage3.is_some());
    assert_eq!(rep.diagnostics.compatibility.len(), 3);
    assert_eq!(rep.diagnostics.rows_non_monotone, 0);
    let json = serde_json::to_string(&rep).unwrap();
    assert!(json.contains("\"stages\":\"123\""));
    let cfg1 = FitConfig { stages: Stages::One, ..cfg };
    let rep1 = fit(&ev, &cov, &cfg1).unwrap();
    assert!(rep1.debias.is_none());
    assert_eq!(rep1.theta, rep1.stage1.theta);
}
