mod common;

use common::{ls_oracle, oracle_stats};
use hawkesnet::simulate::{rng_stream, simulate_hawkes, StreamKind};
use hawkesnet::stats::{compute_stats, ls_value, Window};
use hawkesnet::{CovariateField, HawkesParams, KernelSpec, Theta};
use nalgebra::DMatrix;
use rand::Rng;

fn instance(seed: u64, kernel: KernelSpec, t: f64) -> (hawkesnet::EventLog, CovariateField, HawkesParams) {
    let n = 3;
    let mut rng = rng_stream(seed, 0, StreamKind::Truth);
    let r = rng.random_range(3..7);
    let mut cuts: Vec<f64> = (0..r - 1).map(|_| rng.random_range(0.0..t)).collect();
    cuts.sort_by(f64::total_cmp);
    let mut bounds = vec![0.0];
    bounds.extend(cuts);
    bounds.push(t);
    let values: Vec<f64> = (0..n * r).map(|_| rng.random_range(-1.0..1.0)).collect();
    let cov = CovariateField::new(bounds, n, 1, values).unwrap();
    let c = DMatrix::from_fn(n, n, |_, _| rng.random_range(0.0..0.25));
    let alpha = (0..n).map(|_| rng.random_range(0.5..1.5)).collect();
    let params = HawkesParams::new(c, alpha, vec![rng.random_range(-1.0..1.0)], kernel).unwrap();
    let ev = simulate_hawkes(&params, &cov, t, 10_000, &mut rng_stream(seed, 0, StreamKind::Events)).unwrap();
    (ev, cov, params)
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(1e-12)
}

#[test]
fn matches_quadrature_with_truncation_and_windows() {
    for seed in 0..6u64 {
        let k = if seed % 2 == 0 { KernelSpec::new(1.7, 0.9).unwrap() } else { KernelSpec::untruncated(0.8).unwrap() };
        let (ev, cov, p) = instance(seed, k, 8.0);
        let th = Theta::new(p.beta.clone(), k.gamma());
        for (s, e) in [(0.0, 8.0), (2.5, 8.0), (0.0, 4.1)] {
            let st = compute_stats(&ev, &cov, &th, &k, Window::new(s, e).unwrap()).unwrap();
            let o = oracle_stats(&ev, &cov, &th.beta, k.gamma(), k.horizon(), s, e);
            for i in 0..3 {
                assert!(rel(st.v_diag[i], o.v_diag[i]) < 1e-9);
                assert!((st.v[i] - o.v[i]).abs() < 1e-12 * o.v[i].max(1.0));
                for j in 0..3 {
                    let tol = 1e-9;
                    assert!(rel(st.gram[(i, j)], o.gram[i][j]) < tol || (st.gram[(i, j)] - o.gram[i][j]).abs() < 1e-13,
                        "Γ[{i}{j}] {} vs {}", st.gram[(i, j)], o.gram[i][j]);
                    assert!(rel(st.g[(i, j)], o.g[i][j]) < tol || (st.g[(i, j)] - o.g[i][j]).abs() < 1e-13);
                    assert!(rel(st.a[(i, j)], o.a[i][j]) < tol || (st.a[(i, j)] - o.a[i][j]).abs() < 1e-13);
                }
            }
        }
    }
}

#[test]
fn ls_value_matches_definition() {
    let k = KernelSpec::untruncated(1.2).unwrap();
    let (ev, cov, p) = instance(42, k, 6.0);
    let st = compute_stats(&ev, &cov, &p.theta(), &k, Window::full(&ev)).unwrap();
    for i in 0..3 {
        let c: Vec<f64> = p.c.row(i).iter().copied().collect();
        let got = ls_value(&st, &c, p.alpha[i], i).unwrap();
        let want = ls_oracle(&c, p.alpha[i], &p.beta, 1.2, f64::INFINITY, &ev, &cov, i);
        assert!((got - want).abs() <= 1e-8 * want.abs().max(1.0), "{got} vs {want}");
    }
}
