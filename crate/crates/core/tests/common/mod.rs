//! Independent reference implementations used as test oracles. Nothing here
//! calls into the numerical code under test; only plain data accessors of the
//! library types are used.
#![allow(dead_code)]

pub mod lasso_oracle;

use hawkesnet::{CovariateField, EventLog};

// 15-point Kronrod nodes/weights with embedded 7-point Gauss weights.
const XGK: [f64; 8] = [
    0.991455371120812639206854697526329,
    0.949107912342758524526189684047851,
    0.864864423359769072789712788640926,
    0.741531185599394439863864773280788,
    0.586087235467691130294144845693013,
    0.405845151377397166906606412076961,
    0.207784955007898467600689403773245,
    0.000000000000000000000000000000000,
];
const WGK: [f64; 8] = [
    0.022935322010529224963732008058970,
    0.063092092629978553290700663189204,
    0.104790010322250183839876322541518,
    0.140653259715525918745189590510238,
    0.169004726639267902826583426598550,
    0.190350578064785409913256402421014,
    0.204432940075298892414161999234649,
    0.209482141084727828012999174891714,
];
const WG: [f64; 4] = [
    0.129484966168869693270611432679082,
    0.279705391489276667901467771423780,
    0.381830050505118944950369775488975,
    0.417959183673469387755102040816327,
];

fn gk15<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut k = fc * WGK[7];
    let mut g = fc * WG[3];
    for i in 0..7 {
        let x = h * XGK[i];
        let s = f(c - x) + f(c + x);
        k += WGK[i] * s;
        if i % 2 == 1 {
            g += WG[i / 2] * s;
        }
    }
    (k * h, ((k - g) * h).abs())
}

/// Adaptive Gauss–Kronrod on `[a, b]` by recursive bisection.
pub fn integrate<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, abs_tol: f64) -> f64 {
    fn rec<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, tol: f64, depth: u32) -> f64 {
        let (val, err) = gk15(f, a, b);
        if err <= tol.max(1e-14 * val.abs()) || depth > 30 || (b - a) < 1e-13 * a.abs().max(1.0) {
            return val;
        }
        let m = 0.5 * (a + b);
        rec(f, a, m, 0.5 * tol, depth + 1) + rec(f, m, b, 0.5 * tol, depth + 1)
    }
    if b <= a {
        return 0.0;
    }
    rec(f, a, b, abs_tol, 0)
}

/// Integrate over `[a, b]` split at every breakpoint inside it.
pub fn integrate_pieces<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, breaks: &[f64], abs_tol: f64) -> f64 {
    let mut pts: Vec<f64> = breaks.iter().copied().filter(|&x| x > a && x < b).collect();
    pts.push(a);
    pts.push(b);
    pts.sort_by(f64::total_cmp);
    pts.dedup();
    let k = (pts.len() - 1) as f64;
    pts.windows(2).map(|w| integrate(f, w[0], w[1], abs_tol / k)).sum()
}

/// `w(t−) = Σ_{s<t, t−s≤A} e^{−γ(t−s)}` by direct summation.
pub fn w_direct(times: &[f64], gamma: f64, horizon: f64, t: f64) -> f64 {
    times
        .iter()
        .filter(|&&s| s < t && t - s <= horizon)
        .map(|&s| (-gamma * (t - s)).exp())
        .sum()
}

/// Covariate value by linear scan of the segment grid.
pub fn x_direct(cov: &CovariateField, i: usize, t: f64) -> Vec<f64> {
    let b = cov.boundaries();
    let mut seg = 0;
    for r in 0..cov.n_segments() {
        if b[r] <= t {
            seg = r;
        }
    }
    cov.value(i, seg).to_vec()
}

pub fn nu_direct(cov: &CovariateField, i: usize, beta: &[f64], t: f64) -> f64 {
    x_direct(cov, i, t).iter().zip(beta).map(|(x, b)| x * b).sum::<f64>().exp()
}

pub fn breakpoints(events: &EventLog, cov: &CovariateField, horizon: f64) -> Vec<f64> {
    let mut b: Vec<f64> = cov.boundaries().to_vec();
    for node in events.nodes() {
        for &t in node {
            b.push(t);
            if horizon.is_finite() {
                b.push(t + horizon);
            }
        }
    }
    b
}

/// V, Γ, G, A, v by quadrature and direct event sums over `[start, end]`.
pub struct OracleStats {
    pub v_diag: Vec<f64>,
    pub gram: Vec<Vec<f64>>,
    pub g: Vec<Vec<f64>>,
    pub a: Vec<Vec<f64>>,
    pub v: Vec<f64>,
}

pub fn oracle_stats(
    events: &EventLog,
    cov: &CovariateField,
    beta: &[f64],
    gamma: f64,
    horizon: f64,
    start: f64,
    end: f64,
) -> OracleStats {
    let n = events.n();
    let br = breakpoints(events, cov, horizon);
    let tol = 1e-14;
    let w = |j: usize, t: f64| w_direct(events.node(j), gamma, horizon, t);
    let in_window = |t: f64| (t > start || (start == 0.0 && t >= 0.0)) && t <= end;
    let mut o = OracleStats {
        v_diag: vec![0.0; n],
        gram: vec![vec![0.0; n]; n],
        g: vec![vec![0.0; n]; n],
        a: vec![vec![0.0; n]; n],
        v: vec![0.0; n],
    };
    for i in 0..n {
        o.v_diag[i] = integrate_pieces(&|t| nu_direct(cov, i, beta, t).powi(2), start, end, &br, tol);
        for j in 0..n {
            o.gram[i][j] = integrate_pieces(&|t| w(i, t) * w(j, t), start, end, &br, tol);
            o.g[i][j] = integrate_pieces(&|t| nu_direct(cov, i, beta, t) * w(j, t), start, end, &br, tol);
        }
        for &t in events.node(i).iter().filter(|&&t| in_window(t)) {
            o.v[i] += nu_direct(cov, i, beta, t);
            for j in 0..n {
                o.a[i][j] += w(j, t);
            }
        }
    }
    o
}

/// Intensity `λ_i(t)` from the model definition by direct summation.
pub fn intensity_direct(
    c: &[Vec<f64>],
    alpha: &[f64],
    beta: &[f64],
    gamma: f64,
    horizon: f64,
    events: &EventLog,
    cov: &CovariateField,
    i: usize,
    t: f64,
) -> f64 {
    let mut l = alpha[i] * nu_direct(cov, i, beta, t);
    for (j, cij) in c[i].iter().enumerate() {
        l += cij * w_direct(events.node(j), gamma, horizon, t);
    }
    l
}

/// `∫Ψ_i² − 2Σ_{N_i}Ψ_i(t−)` on `[0, T]` by quadrature.
pub fn ls_oracle(
    c: &[f64],
    a: f64,
    beta: &[f64],
    gamma: f64,
    horizon: f64,
    events: &EventLog,
    cov: &CovariateField,
    i: usize,
) -> f64 {
    let psi = |t: f64| {
        let mut s = a * nu_direct(cov, i, beta, t);
        for (j, cj) in c.iter().enumerate() {
            s += cj * w_direct(events.node(j), gamma, horizon, t);
        }
        s
    };
    let br = breakpoints(events, cov, horizon);
    let int = integrate_pieces(&|t| psi(t).powi(2), 0.0, events.horizon(), &br, 1e-14);
    let sum: f64 = events.node(i).iter().map(|&t| psi(t)).sum();
    int - 2.0 * sum
}

/// Kolmogorov–Smirnov statistic against Exp(rate) and its asymptotic p-value.
pub fn ks_exponential(samples: &[f64], rate: f64) -> (f64, f64) {
    let mut x = samples.to_vec();
    x.sort_by(f64::total_cmp);
    let n = x.len() as f64;
    let mut d: f64 = 0.0;
    for (k, &v) in x.iter().enumerate() {
        let f = 1.0 - (-rate * v).exp();
        d = d.max((k as f64 + 1.0) / n - f).max(f - k as f64 / n);
    }
    let lam = (n.sqrt() + 0.12 + 0.11 / n.sqrt()) * d;
    let mut p = 0.0;
    for k in 1..200 {
        let kf = k as f64;
        let term = 2.0 * (-1f64).powi(k - 1) * (-2.0 * kf * kf * lam * lam).exp();
        p += term;
        if term.abs() < 1e-16 {
            break;
        }
    }
    (d, p.clamp(0.0, 1.0))
}

/// Mean and standard error.
pub fn mean_se(x: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let m = x.iter().sum::<f64>() / n;
    let var = x.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (n - 1.0);
    (m, (var / n).sqrt())
}

/// Random `n`-node instance on `[0, t]` with 3 to 6 covariate segments,
/// one covariate and modest excitation.
pub fn random_instance(
    seed: u64,
    n: usize,
    kernel: hawkesnet::KernelSpec,
    t: f64,
) -> (EventLog, CovariateField, hawkesnet::HawkesParams) {
    use hawkesnet::simulate::{rng_stream, simulate_hawkes, StreamKind};
    use rand::Rng;
    let mut rng = rng_stream(seed, 0, StreamKind::Truth);
    let r = rng.random_range(3..7);
    let mut cuts: Vec<f64> = (0..r - 1).map(|_| rng.random_range(0.0..t)).collect();
    cuts.sort_by(f64::total_cmp);
    let mut bounds = vec![0.0];
    bounds.extend(cuts);
    bounds.push(t);
    let values: Vec<f64> = (0..n * r).map(|_| rng.random_range(-1.0..1.0)).collect();
    let cov = CovariateField::new(bounds, n, 1, values).unwrap();
    let c = nalgebra::DMatrix::from_fn(n, n, |_, _| rng.random_range(0.0..0.25));
    let alpha = (0..n).map(|_| rng.random_range(0.5..1.5)).collect();
    let params = hawkesnet::HawkesParams::new(c, alpha, vec![rng.random_range(-1.0..1.0)], kernel).unwrap();
    let ev = simulate_hawkes(&params, &cov, t, 10_000, &mut rng_stream(seed, 0, StreamKind::Events)).unwrap();
    (ev, cov, params)
}

/// Five-point central difference of `f` along coordinate `k`.
pub fn central_diff<F: Fn(&[f64]) -> f64>(f: &F, x: &[f64], k: usize, h: f64) -> f64 {
    let at = |s: f64| {
        let mut y = x.to_vec();
        y[k] += s;
        f(&y)
    };
    (at(-2.0 * h) - 8.0 * at(-h) + 8.0 * at(h) - at(2.0 * h)) / (12.0 * h)
}

/// Eigenvalues of a symmetric matrix by cyclic Jacobi rotations.
pub fn jacobi_eigenvalues(m: &[Vec<f64>]) -> Vec<f64> {
    let d = m.len();
    let mut a = m.to_vec();
    for _sweep in 0..100 {
        let off: f64 = (0..d).flat_map(|i| (0..d).filter(move |&j| j != i).map(move |j| (i, j))).map(|(i, j)| a[i][j] * a[i][j]).sum();
        if off < 1e-30 {
            break;
        }
        for p in 0..d {
            for q in p + 1..d {
                if a[p][q].abs() < 1e-300 {
                    continue;
                }
                let theta = (a[q][q] - a[p][p]) / (2.0 * a[p][q]);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..d {
                    let (akp, akq) = (a[k][p], a[k][q]);
                    a[k][p] = c * akp - s * akq;
                    a[k][q] = s * akp + c * akq;
                }
                for k in 0..d {
                    let (apk, aqk) = (a[p][k], a[q][k]);
                    a[p][k] = c * apk - s * aqk;
                    a[q][k] = s * apk + c * aqk;
                }
            }
        }
    }
    (0..d).map(|i| a[i][i]).collect()
}
