//! Exact least-squares sufficient statistics.
//!
//! For `θ = (β, γ)` and a window `[S, T']`:
//!
//! ```text
//! V_ii = ∫ ν_i²            Γ_ij = ∫ w_i w_j          G_ij = ∫ ν_i w_j
//! A_ij = Σ_{t ∈ N_i} w_j(t−)                         v_i  = Σ_{t ∈ N_i} ν_i(t)
//! ```
//!
//! with `ν_i = exp(X_i(t)ᵀβ)` and `w_j(t) = ∫_{−∞}^{t−} g(t − r; γ) dN_j(r)`.

mod deriv;
mod integrals;
mod psd;
pub(crate) mod sweep;

pub use deriv::{compute_deriv_stats, DerivStats};
pub use integrals::exp_moments;
pub use psd::{psd_sqrt, PsdSqrt};

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{dim_check, Error, Result};
use crate::model::{dot, CovariateField, EventLog, HawkesParams, KernelSpec, Theta};
use sweep::{sweep, Order, SweepState, Visitor};

/// Time window `[start, end]` of a statistics evaluation.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Window {
    pub start: f64,
    pub end: f64,
}

impl Window {
    pub fn new(start: f64, end: f64) -> Result<Self> {
        if !(start >= 0.0 && end > start && end.is_finite()) {
            return Err(Error::InvalidInput(format!("empty or invalid window [{start}, {end}]")));
        }
        Ok(Self { start, end })
    }

    pub fn full(events: &EventLog) -> Self {
        Self { start: 0.0, end: events.horizon() }
    }

    pub fn len(&self) -> f64 {
        self.end - self.start
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SuffStats {
    pub theta: Theta,
    pub kernel: KernelSpec,
    pub window: Window,
    pub v_diag: Vec<f64>,
    #[serde(with = "crate::serde_matrix")]
    pub gram: DMatrix<f64>,
    #[serde(with = "crate::serde_matrix")]
    pub g: DMatrix<f64>,
    #[serde(with = "crate::serde_matrix")]
    pub a: DMatrix<f64>,
    pub v: Vec<f64>,
    /// `∫ ν_i`, for compensators.
    pub nu_int: Vec<f64>,
    /// `∫ w_j`, for compensators.
    pub w_int: Vec<f64>,
    /// Events per node inside the window.
    pub counts: Vec<usize>,
}

impl SuffStats {
    pub fn n(&self) -> usize {
        self.v_diag.len()
    }
}

/// Per-node, per-segment baseline `ν_i = exp(x_{i,r}ᵀβ)`.
pub(crate) fn baseline_table(cov: &CovariateField, beta: &[f64]) -> Vec<Vec<f64>> {
    (0..cov.n())
        .map(|i| (0..cov.n_segments()).map(|r| dot(cov.value(i, r), beta).exp()).collect())
        .collect()
}

pub(crate) fn check_inputs(events: &EventLog, cov: &CovariateField, beta: &[f64], window: &Window) -> Result<()> {
    dim_check("covariate node count", events.n(), cov.n())?;
    dim_check("beta length", cov.dim(), beta.len())?;
    if window.end > events.horizon() * (1.0 + 1e-12) || window.end > cov.horizon() * (1.0 + 1e-12) {
        return Err(Error::InvalidInput(format!(
            "window end {} exceeds the observation horizon",
            window.end
        )));
    }
    if !(window.end > window.start) {
        return Err(Error::InvalidInput("empty window".into()));
    }
    Ok(())
}

struct StatsVisitor<'a> {
    nu: &'a [Vec<f64>],
    gamma: f64,
    s: SuffStats,
}

impl Visitor for StatsVisitor<'_> {
    fn cell(&mut self, seg: usize, h: f64, st: &SweepState) {
        let n = self.s.n();
        let [i0, _, _] = exp_moments(self.gamma, h);
        let [i0_2, _, _] = exp_moments(2.0 * self.gamma, h);
        let active: Vec<usize> = (0..n).filter(|&j| st.w[j] > 0.0).collect();
        for i in 0..n {
            let nu = self.nu[i][seg];
            self.s.v_diag[i] += nu * nu * h;
            self.s.nu_int[i] += nu * h;
            for &j in &active {
                self.s.g[(i, j)] += nu * st.w[j] * i0;
            }
        }
        for (k, &i) in active.iter().enumerate() {
            self.s.w_int[i] += st.w[i] * i0;
            for &j in &active[k..] {
                self.s.gram[(i, j)] += st.w[i] * st.w[j] * i0_2;
            }
        }
    }

    fn event(&mut self, node: usize, seg: usize, st: &SweepState) {
        self.s.v[node] += self.nu[node][seg];
        self.s.counts[node] += 1;
        for j in 0..self.s.n() {
            self.s.a[(node, j)] += st.w[j];
        }
    }
}

/// Closed-form statistics on the merged mesh.
pub fn compute_stats(
    events: &EventLog,
    cov: &CovariateField,
    theta: &Theta,
    kernel: &KernelSpec,
    window: Window,
) -> Result<SuffStats> {
    check_inputs(events, cov, &theta.beta, &window)?;
    if (kernel.gamma() - theta.gamma).abs() > 1e-15 * theta.gamma.abs() {
        return Err(Error::InvalidInput("kernel decay differs from theta.gamma".into()));
    }
    let n = events.n();
    let nu = baseline_table(cov, &theta.beta);
    let mut vis = StatsVisitor {
        nu: &nu,
        gamma: kernel.gamma(),
        s: SuffStats {
            theta: theta.clone(),
            kernel: *kernel,
            window,
            v_diag: vec![0.0; n],
            gram: DMatrix::zeros(n, n),
            g: DMatrix::zeros(n, n),
            a: DMatrix::zeros(n, n),
            v: vec![0.0; n],
            nu_int: vec![0.0; n],
            w_int: vec![0.0; n],
            counts: vec![0; n],
        },
    };
    sweep(events, cov, kernel, window.start, window.end, Order::Value, &mut vis);
    let mut s = vis.s;
    for i in 0..n {
        for j in 0..i {
            s.gram[(i, j)] = s.gram[(j, i)];
        }
    }
    Ok(s)
}

/// `LS_i(c, a) = a²V_ii + cΓcᵀ + 2a c·G_i − 2a v_i − 2c·A_i`.
pub fn ls_value(stats: &SuffStats, c: &[f64], a: f64, i: usize) -> Result<f64> {
    let n = stats.n();
    dim_check("row length", n, c.len())?;
    if i >= n {
        return Err(Error::Dimension(format!("node {i} out of range")));
    }
    let cv = DVector::from_column_slice(c);
    let quad = (stats.gram.clone() * &cv).dot(&cv);
    let mut cg = 0.0;
    let mut ca = 0.0;
    for j in 0..n {
        cg += c[j] * stats.g[(i, j)];
        ca += c[j] * stats.a[(i, j)];
    }
    Ok(a * a * stats.v_diag[i] + quad + 2.0 * a * cg - 2.0 * a * stats.v[i] - 2.0 * ca)
}

/// Trace form `αᵀVα + tr(CΓCᵀ) + 2αᵀdiag(CGᵀ) − 2αᵀv − 2tr(CAᵀ)`.
pub fn ls_total(stats: &SuffStats, c: &DMatrix<f64>, alpha: &[f64]) -> Result<f64> {
    let n = stats.n();
    dim_check("C rows", n, c.nrows())?;
    dim_check("C cols", n, c.ncols())?;
    dim_check("alpha length", n, alpha.len())?;
    let cgc = c * &stats.gram * c.transpose();
    let cg = c * stats.g.transpose();
    let ca = c * stats.a.transpose();
    let mut total = 0.0;
    for i in 0..n {
        total += alpha[i] * alpha[i] * stats.v_diag[i] + cgc[(i, i)] + 2.0 * alpha[i] * cg[(i, i)]
            - 2.0 * alpha[i] * stats.v[i]
            - 2.0 * ca[(i, i)];
    }
    Ok(total)
}

/// `N_i(window) − ∫_window λ_i` at the given parameters.
pub fn compensator_residuals(stats: &SuffStats, params: &HawkesParams) -> Result<Vec<f64>> {
    let n = stats.n();
    dim_check("parameter node count", n, params.n())?;
    Ok((0..n)
        .map(|i| {
            let exc: f64 = (0..n).map(|j| params.c[(i, j)] * stats.w_int[j]).sum();
            stats.counts[i] as f64 - params.alpha[i] * stats.nu_int[i] - exc
        })
        .collect())
}

/// Event-anchored excitation path of one node.
#[derive(Clone, Debug, PartialEq)]
pub struct ExcitationPath {
    times: Vec<f64>,
    /// `w(t_k−)` at each event.
    pre_jump: Vec<f64>,
    kernel: KernelSpec,
}

/// Pre-jump values by recursion `w(t_{k+1}−) = (w(t_k−) + 1)e^{−γΔ}`, with
/// events older than the horizon removed.
pub fn excitation_path(times: &[f64], kernel: &KernelSpec) -> ExcitationPath {
    let gamma = kernel.gamma();
    let horizon = kernel.horizon();
    let mut pre_jump = Vec::with_capacity(times.len());
    let mut w = 0.0;
    let mut oldest = 0usize;
    for (k, &t) in times.iter().enumerate() {
        if k > 0 {
            w = (w + 1.0) * (-gamma * (t - times[k - 1])).exp();
        }
        while oldest < k && t - times[oldest] > horizon {
            w -= (-gamma * (t - times[oldest])).exp();
            oldest += 1;
        }
        if oldest == k {
            w = 0.0;
        }
        pre_jump.push(w.max(0.0));
    }
    ExcitationPath { times: times.to_vec(), pre_jump, kernel: *kernel }
}

impl ExcitationPath {
    pub fn pre_jump(&self) -> &[f64] {
        &self.pre_jump
    }

    /// `w(t−)`.
    pub fn value_before(&self, t: f64) -> f64 {
        let k = self.times.partition_point(|&s| s < t);
        if k == 0 {
            return 0.0;
        }
        let gamma = self.kernel.gamma();
        if !self.kernel.is_truncated() {
            return (self.pre_jump[k - 1] + 1.0) * (-gamma * (t - self.times[k - 1])).exp();
        }
        let lo = self.times.partition_point(|&s| t - s > self.kernel.horizon());
        self.times[lo..k].iter().map(|&s| (-gamma * (t - s)).exp()).sum()
    }
}
