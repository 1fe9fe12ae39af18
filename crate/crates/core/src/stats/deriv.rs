//! Integrals needed by the first and second derivatives of the criterion in
//! `(β, γ)`. With `m_j = −∂_γ w_j` and `q_j = ∂²_γ w_j`:
//!
//! ```text
//! vx_ik  = ∫ x_k ν_i²         gx_ijk = ∫ x_k ν_i w_j      ex_ik = Σ_{N_i} x_k ν_i
//! gm_ij  = ∫ ν_i m_j          gxm_ijk = ∫ x_k ν_i m_j     gq_ij = ∫ ν_i q_j
//! wm_lj  = ∫ w_l m_j          wq_lj = ∫ w_l q_j           mm_jl = ∫ m_j m_l
//! am_ij  = Σ_{N_i} m_j(t−)    aq_ij = Σ_{N_i} q_j(t−)
//! ```
//!
//! plus the second-order covariate moments `vxx`, `gxx`, `exx`.

use nalgebra::DMatrix;

use super::integrals::exp_moments;
use super::sweep::{sweep, Order, SweepState, Visitor};
use super::{baseline_table, check_inputs, compute_stats, SuffStats, Window};
use crate::error::Result;
use crate::model::{CovariateField, EventLog, KernelSpec, Theta};

#[derive(Clone, Debug)]
pub struct DerivStats {
    pub base: SuffStats,
    pub p: usize,
    /// n×p
    pub vx: DMatrix<f64>,
    /// per node, p×p
    pub vxx: Vec<DMatrix<f64>>,
    /// n×p
    pub ex: DMatrix<f64>,
    /// per node, p×p
    pub exx: Vec<DMatrix<f64>>,
    /// per node i, n×p over (j, k)
    pub gx: Vec<DMatrix<f64>>,
    /// per (i, j) pair at `i*n + j`, p×p
    pub gxx: Vec<DMatrix<f64>>,
    pub gm: DMatrix<f64>,
    /// per node i, n×p over (j, k)
    pub gxm: Vec<DMatrix<f64>>,
    pub gq: DMatrix<f64>,
    pub wm: DMatrix<f64>,
    pub wq: DMatrix<f64>,
    pub mm: DMatrix<f64>,
    pub am: DMatrix<f64>,
    pub aq: DMatrix<f64>,
}

struct DerivVisitor<'a> {
    cov: &'a CovariateField,
    nu: &'a [Vec<f64>],
    gamma: f64,
    d: DerivStats,
    active: Vec<usize>,
}

impl Visitor for DerivVisitor<'_> {
    fn cell(&mut self, seg: usize, h: f64, st: &SweepState) {
        let n = self.nu.len();
        let p = self.d.p;
        let [i0, i1, i2] = exp_moments(self.gamma, h);
        let [j0, j1, j2] = exp_moments(2.0 * self.gamma, h);
        self.active.clear();
        self.active.extend((0..n).filter(|&j| st.w[j] > 0.0));
        for i in 0..n {
            let x = self.cov.value(i, seg);
            let nu = self.nu[i][seg];
            for k in 0..p {
                self.d.vx[(i, k)] += x[k] * nu * nu * h;
                for l in 0..p {
                    self.d.vxx[i][(k, l)] += x[k] * x[l] * nu * nu * h;
                }
            }
            for &j in &self.active {
                let (w, m, q) = (st.w[j], st.m[j], st.q[j]);
                let wi = w * i0;
                let mi = m * i0 + w * i1;
                let qi = q * i0 + 2.0 * m * i1 + w * i2;
                self.d.gm[(i, j)] += nu * mi;
                self.d.gq[(i, j)] += nu * qi;
                let gxx = &mut self.d.gxx[i * n + j];
                for k in 0..p {
                    self.d.gx[i][(j, k)] += x[k] * nu * wi;
                    self.d.gxm[i][(j, k)] += x[k] * nu * mi;
                    for l in 0..p {
                        gxx[(k, l)] += x[k] * x[l] * nu * wi;
                    }
                }
            }
        }
        for &l in &self.active {
            for &j in &self.active {
                let (wl, ml) = (st.w[l], st.m[l]);
                let (wj, mj, qj) = (st.w[j], st.m[j], st.q[j]);
                self.d.wm[(l, j)] += wl * (mj * j0 + wj * j1);
                self.d.wq[(l, j)] += wl * (qj * j0 + 2.0 * mj * j1 + wj * j2);
                self.d.mm[(l, j)] += ml * mj * j0 + (ml * wj + wl * mj) * j1 + wl * wj * j2;
            }
        }
    }

    fn event(&mut self, node: usize, seg: usize, st: &SweepState) {
        let p = self.d.p;
        let x = self.cov.value(node, seg);
        let nu = self.nu[node][seg];
        for k in 0..p {
            self.d.ex[(node, k)] += x[k] * nu;
            for l in 0..p {
                self.d.exx[node][(k, l)] += x[k] * x[l] * nu;
            }
        }
        for j in 0..self.nu.len() {
            self.d.am[(node, j)] += st.m[j];
            self.d.aq[(node, j)] += st.q[j];
        }
    }
}

pub fn compute_deriv_stats(
    events: &EventLog,
    cov: &CovariateField,
    theta: &Theta,
    kernel: &KernelSpec,
    window: Window,
) -> Result<DerivStats> {
    check_inputs(events, cov, &theta.beta, &window)?;
    let base = compute_stats(events, cov, theta, kernel, window)?;
    let n = events.n();
    let p = theta.beta.len();
    let nu = baseline_table(cov, &theta.beta);
    let z = |r, c| DMatrix::zeros(r, c);
    let mut vis = DerivVisitor {
        cov,
        nu: &nu,
        gamma: kernel.gamma(),
        active: Vec::with_capacity(n),
        d: DerivStats {
            base,
            p,
            vx: z(n, p),
            vxx: vec![z(p, p); n],
            ex: z(n, p),
            exx: vec![z(p, p); n],
            gx: vec![z(n, p); n],
            gxx: vec![z(p, p); n * n],
            gm: z(n, n),
            gxm: vec![z(n, p); n],
            gq: z(n, n),
            wm: z(n, n),
            wq: z(n, n),
            mm: z(n, n),
            am: z(n, n),
            aq: z(n, n),
        },
    };
    sweep(events, cov, kernel, window.start, window.end, Order::Second, &mut vis);
    Ok(vis.d)
}
