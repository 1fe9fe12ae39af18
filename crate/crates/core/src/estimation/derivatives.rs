//! Gradient and Hessian of `(1/nT)Σᵢ LSᵢ` in the flat parameter order
//! `(β₁…β_p, γ, α₁…α_n, C row-major)`.

use nalgebra::{DMatrix, DVector};

use crate::error::{dim_check, Error, Result};
use crate::model::{CovariateField, EventLog, HawkesParams};
use crate::stats::{compute_deriv_stats, DerivStats, Window};

/// Largest network for which the full Σ is assembled.
pub const SIGMA_NODE_CAP: usize = 40;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Layout {
    pub p: usize,
    pub n: usize,
}

impl Layout {
    pub fn new(p: usize, n: usize) -> Self {
        Self { p, n }
    }
    pub fn dim(&self) -> usize {
        self.p + 1 + self.n + self.n * self.n
    }
    pub fn beta(&self, k: usize) -> usize {
        k
    }
    pub fn gamma(&self) -> usize {
        self.p
    }
    pub fn alpha(&self, i: usize) -> usize {
        self.p + 1 + i
    }
    pub fn c(&self, i: usize, j: usize) -> usize {
        self.p + 1 + self.n + i * self.n + j
    }
    /// Indices of the global parameters θ.
    pub fn theta_indices(&self) -> Vec<usize> {
        (0..=self.p).collect()
    }
}

/// Flat parameter vector in [`Layout`] order.
pub fn flatten(params: &HawkesParams) -> DVector<f64> {
    let l = Layout::new(params.p(), params.n());
    let mut x = DVector::zeros(l.dim());
    for k in 0..l.p {
        x[l.beta(k)] = params.beta[k];
    }
    x[l.gamma()] = params.gamma();
    for i in 0..l.n {
        x[l.alpha(i)] = params.alpha[i];
        for j in 0..l.n {
            x[l.c(i, j)] = params.c[(i, j)];
        }
    }
    x
}

/// Score and (optionally) Σ at `(C, α)` with θ fixed by the statistics.
pub fn derivatives_from_stats(
    ds: &DerivStats,
    c: &DMatrix<f64>,
    alpha: &[f64],
    with_sigma: bool,
) -> Result<(DVector<f64>, Option<DMatrix<f64>>)> {
    let s = &ds.base;
    let n = s.n();
    let p = ds.p;
    dim_check("C rows", n, c.nrows())?;
    dim_check("C cols", n, c.ncols())?;
    dim_check("alpha length", n, alpha.len())?;
    if with_sigma && n > SIGMA_NODE_CAP {
        return Err(Error::Dimension(format!(
            "Σ is assembled only up to {SIGMA_NODE_CAP} nodes, got {n}; fit stage 1 only or reduce the network"
        )));
    }
    let l = Layout::new(p, n);
    let t = s.window.len();
    let scale = 1.0 / (n as f64 * t);
    let mut g = DVector::zeros(l.dim());
    let mut h = if with_sigma { Some(DMatrix::zeros(l.dim(), l.dim())) } else { None };
    let gi = l.gamma();
    for i in 0..n {
        let a = alpha[i];
        let ci: Vec<f64> = (0..n).map(|j| c[(i, j)]).collect();
        // (CΓ)_{ij}, Σ_l C_il wm_lj, Σ_l wm_jl C_il
        let cgam: Vec<f64> = (0..n).map(|j| (0..n).map(|k| ci[k] * s.gram[(k, j)]).sum()).collect();
        let cwm_in: Vec<f64> = (0..n).map(|j| (0..n).map(|k| ci[k] * ds.wm[(k, j)]).sum()).collect();
        let cwm_out: Vec<f64> = (0..n).map(|j| (0..n).map(|k| ci[k] * ds.wm[(j, k)]).sum()).collect();
        let cg: f64 = (0..n).map(|j| ci[j] * s.g[(i, j)]).sum();
        let cgm: f64 = (0..n).map(|j| ci[j] * ds.gm[(i, j)]).sum();
        let cwmc: f64 = (0..n).map(|j| ci[j] * cwm_in[j]).sum();
        let cam: f64 = (0..n).map(|j| ci[j] * ds.am[(i, j)]).sum();

        for k in 0..p {
            let cgx: f64 = (0..n).map(|j| ci[j] * ds.gx[i][(j, k)]).sum();
            g[l.beta(k)] += 2.0 * a * (a * ds.vx[(i, k)] + cgx - ds.ex[(i, k)]);
        }
        g[gi] += 2.0 * (-a * cgm - cwmc + cam);
        g[l.alpha(i)] = 2.0 * (a * s.v_diag[i] + cg - s.v[i]);
        for j in 0..n {
            g[l.c(i, j)] = 2.0 * (a * s.g[(i, j)] + cgam[j] - s.a[(i, j)]);
        }

        let Some(h) = h.as_mut() else { continue };
        let ai = l.alpha(i);
        put(h, ai, ai, 2.0 * s.v_diag[i]);
        for j in 0..n {
            put(h, ai, l.c(i, j), 2.0 * s.g[(i, j)]);
            for m in 0..n {
                put(h, l.c(i, j), l.c(i, m), 2.0 * s.gram[(j, m)]);
            }
        }
        for k in 0..p {
            let cgx: f64 = (0..n).map(|j| ci[j] * ds.gx[i][(j, k)]).sum();
            put(h, ai, l.beta(k), 2.0 * a * ds.vx[(i, k)] + 2.0 * (a * ds.vx[(i, k)] + cgx) - 2.0 * ds.ex[(i, k)]);
            for j in 0..n {
                put(h, l.c(i, j), l.beta(k), 2.0 * a * ds.gx[i][(j, k)]);
            }
            for m in k..p {
                let cgxx: f64 = (0..n).map(|j| ci[j] * ds.gxx[i * n + j][(k, m)]).sum();
                bump(h, l.beta(k), l.beta(m), 2.0 * a * a * ds.vxx[i][(k, m)]
                    + 2.0 * a * (a * ds.vxx[i][(k, m)] + cgxx)
                    - 2.0 * a * ds.exx[i][(k, m)]);
            }
            let cgxm: f64 = (0..n).map(|j| ci[j] * ds.gxm[i][(j, k)]).sum();
            bump(h, l.beta(k), gi, -2.0 * a * cgxm);
        }
        put(h, ai, gi, -2.0 * cgm);
        for j in 0..n {
            let v = -2.0 * cwm_out[j] - 2.0 * (a * ds.gm[(i, j)] + cwm_in[j]) + 2.0 * ds.am[(i, j)];
            put(h, l.c(i, j), gi, v);
        }
        let mut gg = 0.0;
        for j in 0..n {
            let cj = ci[j];
            if cj == 0.0 {
                continue;
            }
            gg += 2.0 * a * cj * ds.gq[(i, j)] - 2.0 * cj * ds.aq[(i, j)];
            for m in 0..n {
                gg += 2.0 * cj * ci[m] * (ds.mm[(j, m)] + ds.wq[(m, j)]);
            }
        }
        bump(h, gi, gi, gg);
    }
    g *= scale;
    if let Some(h) = h.as_mut() {
        *h *= scale;
    }
    Ok((g, h))
}

fn put(h: &mut DMatrix<f64>, r: usize, q: usize, v: f64) {
    h[(r, q)] = v;
    h[(q, r)] = v;
}

fn bump(h: &mut DMatrix<f64>, r: usize, q: usize, v: f64) {
    h[(r, q)] += v;
    if r != q {
        h[(q, r)] += v;
    }
}

fn deriv_stats_at(events: &EventLog, cov: &CovariateField, params: &HawkesParams, window: Window) -> Result<DerivStats> {
    compute_deriv_stats(events, cov, &params.theta(), &params.kernel, window)
}

/// Gradient of `(1/nT)Σᵢ LSᵢ` over the full observation window.
pub fn compute_score(events: &EventLog, cov: &CovariateField, params: &HawkesParams) -> Result<DVector<f64>> {
    let ds = deriv_stats_at(events, cov, params, Window::full(events))?;
    Ok(derivatives_from_stats(&ds, &params.c, &params.alpha, false)?.0)
}

/// Σ, the Hessian of `(1/nT)Σᵢ LSᵢ`, over the full observation window.
pub fn compute_sigma(events: &EventLog, cov: &CovariateField, params: &HawkesParams) -> Result<DMatrix<f64>> {
    let ds = deriv_stats_at(events, cov, params, Window::full(events))?;
    Ok(derivatives_from_stats(&ds, &params.c, &params.alpha, true)?.1.expect("requested"))
}

/// Score and Σ from one pass over the data.
pub fn compute_score_and_sigma(
    events: &EventLog,
    cov: &CovariateField,
    params: &HawkesParams,
) -> Result<(DVector<f64>, DMatrix<f64>)> {
    let ds = deriv_stats_at(events, cov, params, Window::full(events))?;
    let (g, h) = derivatives_from_stats(&ds, &params.c, &params.alpha, true)?;
    Ok((g, h.expect("requested")))
}
