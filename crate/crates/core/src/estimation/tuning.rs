//! Data-driven penalty levels from the concentration bounds: empirical
//! suprema over finite grids of the β and γ boxes, plus additive log-term
//! floors.

use serde::{Deserialize, Serialize};

use super::stage1::{FitData, ThetaBox};
use crate::error::{dim_check, Error, Result};
use crate::model::{dot, HawkesParams};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OmegaRule {
    /// `ωᵢ = d_{n,i}`
    D,
    /// `ωᵢ = 3·d_{n,i}`
    ThreeD,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TuningConstants {
    pub mu: f64,
    /// `None` picks the smallest value for which the bounded-increments event holds.
    pub n0: Option<f64>,
    pub alpha: [f64; 4],
    pub beta_grid: usize,
    pub gamma_grid: usize,
    pub omega_rule: OmegaRule,
    pub theta_box: ThetaBox,
}

impl Default for TuningConstants {
    fn default() -> Self {
        Self {
            mu: 1.0,
            n0: None,
            alpha: [1.0; 4],
            beta_grid: 16,
            gamma_grid: 32,
            omega_rule: OmegaRule::ThreeD,
            theta_box: ThetaBox::default(),
        }
    }
}

pub fn phi(u: f64) -> f64 {
    u.exp() - u - 1.0
}

impl TuningConstants {
    pub fn validate(&self) -> Result<()> {
        if !(self.mu > 0.0 && self.mu < 3.0) || self.mu <= phi(self.mu) {
            return Err(Error::Domain(format!("μ = {} must lie in (0, 3) with μ > e^μ − μ − 1", self.mu)));
        }
        if self.alpha.iter().any(|&a| !(a > 0.0)) {
            return Err(Error::InvalidInput("α₁..α₄ must be positive".into()));
        }
        if let Some(n0) = self.n0 {
            if !(n0 > 0.0) {
                return Err(Error::InvalidInput("N₀ must be positive".into()));
            }
        }
        if self.beta_grid < 2 || self.gamma_grid < 2 {
            return Err(Error::InvalidInput("grids need at least two points".into()));
        }
        self.theta_box.validate()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TuningValues {
    pub a_n: f64,
    /// Needs pilot parameters.
    pub b_n: Option<f64>,
    pub d_n: Vec<f64>,
    /// Needs pilot parameters.
    pub e_n: Option<f64>,
    pub omega: Vec<f64>,
    pub mu: f64,
    pub n0: f64,
    pub alpha: [f64; 4],
    pub omega_rule: OmegaRule,
    /// Block length used for the bounded-increments event.
    pub block_length: f64,
    /// Largest event count of any node in any block.
    pub max_block_count: usize,
    /// Whether the bounded-increments event holds on the data.
    pub increments_bounded: bool,
}

fn linspace(lo: f64, hi: f64, k: usize) -> Vec<f64> {
    (0..k).map(|r| lo + (hi - lo) * r as f64 / (k - 1) as f64).collect()
}

/// `w_j(t−)` at each sorted query time, with events in `(t − A, t)`.
fn excitation_at(source: &[f64], queries: &[f64], gamma: f64, horizon: f64) -> Vec<f64> {
    let mut out = Vec::with_capacity(queries.len());
    let (mut head, mut tail) = (0usize, 0usize);
    let mut w = 0.0;
    let mut t_last = 0.0;
    for &t in queries {
        w *= (-gamma * (t - t_last)).exp();
        t_last = t;
        while head < source.len() && source[head] < t {
            w += (-gamma * (t - source[head])).exp();
            head += 1;
        }
        while tail < head && t - source[tail] > horizon {
            w -= (-gamma * (t - source[tail])).exp();
            tail += 1;
        }
        if tail == head {
            w = 0.0;
        }
        out.push(w.max(0.0));
    }
    out
}

/// Events of the window per node, `(start, end]` (or `[0, end]` from 0).
fn window_events(data: &FitData) -> Vec<Vec<f64>> {
    let (s, e) = (data.window.start, data.window.end);
    data.events
        .nodes()
        .iter()
        .map(|v| v.iter().copied().filter(|&t| (t > s || (s == 0.0 && t >= 0.0)) && t <= e).collect())
        .collect()
}

fn beta_grid(p: usize, b: &ThetaBox, k: usize) -> Result<Vec<Vec<f64>>> {
    let axis = linspace(b.beta[0], b.beta[1], k);
    let total = (k as f64).powi(p as i32);
    if total > 1e6 {
        return Err(Error::InvalidInput(format!("β grid of {total} points is too large")));
    }
    let mut grid = vec![Vec::new()];
    for _ in 0..p {
        grid = grid
            .into_iter()
            .flat_map(|g| axis.iter().map(move |&v| {
                let mut h = g.clone();
                h.push(v);
                h
            }))
            .collect();
    }
    Ok(grid)
}

/// The four penalty levels and the resulting ω. Pilot parameters supply
/// `β*`, `γ*`, `C*` and `K_α`; without them `b_n` and `e_n` are omitted.
pub fn theory_tuning(data: &FitData, pilot: Option<&HawkesParams>, k: &TuningConstants) -> Result<TuningValues> {
    k.validate()?;
    let n = data.n();
    let p = data.p();
    if let Some(pp) = pilot {
        dim_check("pilot node count", n, pp.n())?;
        dim_check("pilot covariate dimension", p, pp.p())?;
    }
    let t = data.window.len();
    let nf = n as f64;
    let lnt = (nf * t).ln();
    if !(lnt > 0.0) {
        return Err(Error::Domain(format!("log(nT) must be positive, nT = {}", nf * t)));
    }
    let mu = k.mu;
    let denom = mu - phi(mu);
    let [a1, a2, a3, a4] = k.alpha;
    let ev = window_events(data);
    let cov = data.covariates;
    let b = &k.theta_box;

    // bounded-increments event on blocks of the kernel horizon
    let gamma_ref = pilot.map(|pp| pp.gamma()).unwrap_or(b.gamma[0]);
    let block = pilot.map(|pp| pp.kernel.horizon()).unwrap_or(data.horizon.kernel(gamma_ref)?.horizon());
    let blocks = if block.is_finite() && block < t { (t / block).floor() as usize + 1 } else { 1 };
    let mut max_block = 0usize;
    for node in &ev {
        let mut counts = vec![0usize; blocks];
        for &s in node {
            let r = if blocks == 1 { 0 } else { (((s - data.window.start) / block).floor() as usize).min(blocks - 1) };
            counts[r] += 1;
        }
        max_block = max_block.max(counts.into_iter().max().unwrap_or(0));
    }
    let n0 = k.n0.unwrap_or(max_block.max(1) as f64 / (3.0 * lnt));
    let big_n = 6.0 * n0 * lnt;
    let bounded = (max_block as f64) <= big_n / 2.0 * (1.0 + 1e-12);
    let ind = if bounded { 1.0 } else { 0.0 };

    // baseline suprema over the β grid
    let grid = beta_grid(p, b, k.beta_grid)?;
    let mut nu_bar: f64 = 0.0;
    let mut l_nu: f64 = 0.0;
    let mut sup_a: f64 = 0.0;
    for beta in &grid {
        for i in 0..n {
            for r in 0..cov.n_segments() {
                let x = cov.value(i, r);
                let nu = dot(x, beta).exp();
                nu_bar = nu_bar.max(nu);
                l_nu = l_nu.max(nu * x.iter().map(|v| v * v).sum::<f64>().sqrt());
            }
            let s: f64 = ev[i].iter().map(|&s| dot(cov.at(i, s), beta).exp().powi(2)).sum();
            sup_a = sup_a.max(s);
        }
    }
    let la = nf.ln() + p as f64 * t.ln() + a1 * lnt;
    let v_a = 16.0 * mu * sup_a / (denom * t * t) + 16.0 * nu_bar * nu_bar * la / (denom * t * t);
    let a_n = (2.0 * (v_a * la).sqrt() + 4.0 * nu_bar * la / (3.0 * t)) * ind;

    // excitation suprema over the γ grid; the sup of Σ w² at fixed j is
    // attained on the grid points, evaluated for every pair
    let gammas = linspace(b.gamma[0], b.gamma[1], k.gamma_grid);
    let g_bar = 1.0;
    let ld = nf.ln() + lnt + a3 * t.ln();
    let mut sup_d = vec![0.0f64; n];
    for &gm in &gammas {
        let kern = data.horizon.kernel(gm)?;
        for j in 0..n {
            for i in 0..n {
                let w = excitation_at(&ev[j], &ev[i], gm, kern.horizon());
                sup_d[i] = sup_d[i].max(w.iter().map(|v| v * v).sum());
            }
        }
    }
    let floor_d = 567.0 * g_bar * g_bar * n0 * n0 * lnt * lnt * ld / (denom * t * t);
    let d_n: Vec<f64> = sup_d
        .iter()
        .map(|&s| {
            let v = 16.0 * mu * s / (denom * t * t) + floor_d;
            (2.0 * (v * ld).sqrt() + 24.0 * g_bar * n0 * lnt * ld / (3.0 * t)) * ind
        })
        .collect();

    let (b_n, e_n) = match pilot {
        None => (None, None),
        Some(pp) => {
            let k_alpha = pp.alpha.iter().copied().fold(1.0, f64::max);
            // V̂_b: the sup over ‖β₂‖₁ = 1 of a PSD form sits at a vertex ±e_k
            let mut sup_b: f64 = 0.0;
            for beta1 in &grid {
                let mut diag = vec![0.0; p];
                for i in 0..n {
                    for &s in &ev[i] {
                        let x = cov.at(i, s);
                        let delta = x.iter().zip(beta1.iter().zip(&pp.beta)).map(|(xk, (b1, bs))| xk * (b1 - bs)).sum::<f64>();
                        let nu_star = dot(x, &pp.beta).exp();
                        let mean = if delta.abs() > 1e-10 { nu_star * delta.exp_m1() / delta } else { nu_star * (1.0 + 0.5 * delta) };
                        for kk in 0..p {
                            diag[kk] += (x[kk] * mean).powi(2);
                        }
                    }
                }
                sup_b = sup_b.max(diag.into_iter().fold(0.0, f64::max));
            }
            let lb = (2.0 * p as f64 + a2) * lnt;
            let v_b = 16.0 * k_alpha * k_alpha * mu * sup_b / (denom * nf * nf * t * t)
                + 16.0 * k_alpha * k_alpha * l_nu * l_nu * lb / (denom * nf * nf * t * t);
            let b_n = (2.0 * (v_b * lb).sqrt() + 4.0 * k_alpha * l_nu * lb / (3.0 * nf * t)) * ind;

            // V̂_e with the mean-value kernel derivative (g(γ̄) − g(γ*))/(γ̄ − γ*)
            let gs = pp.gamma();
            let a_fix = pp.kernel.horizon();
            let c_max = (0..n).map(|i| pp.c.row(i).iter().map(|v| v.abs()).sum::<f64>()).fold(0.0, f64::max);
            let mut sup_e: f64 = 0.0;
            for &gm in &gammas {
                let gm_eff = if (gm - gs).abs() < 1e-9 { gs + 1e-6 } else { gm };
                let mut total = 0.0;
                for i in 0..n {
                    let mut acc = vec![0.0; ev[i].len()];
                    for j in 0..n {
                        let cij = pp.c[(i, j)];
                        if cij == 0.0 {
                            continue;
                        }
                        let w1 = excitation_at(&ev[j], &ev[i], gm_eff, a_fix);
                        let w0 = excitation_at(&ev[j], &ev[i], gs, a_fix);
                        for e in 0..acc.len() {
                            acc[e] += cij * 4.0 * (w1[e] - w0[e]) / (gm_eff - gs) / (nf * t);
                        }
                    }
                    total += acc.iter().map(|v| v * v).sum::<f64>();
                }
                sup_e = sup_e.max(total);
            }
            let gmin = b.gamma[0];
            // sup over γ in the box and u in [0, A] of u·e^{−γu}
            let l_g = if 1.0 / gmin <= a_fix { 1.0 / (std::f64::consts::E * gmin) } else { a_fix * (-gmin * a_fix).exp() };
            let v_e = mu / denom * sup_e
                + 576.0 * l_g * l_g * n0 * n0 * (1.0 + a4) * c_max * c_max * lnt.powi(3) / (denom * nf * nf * t * t);
            let e_n = (2.0 * (v_e * (1.0 + a4) * lnt).sqrt()
                + 24.0 * l_g * n0 * (1.0 + a4) * c_max * lnt * lnt / (3.0 * nf * t))
                * ind;
            (Some(b_n), Some(e_n))
        }
    };
    let factor = match k.omega_rule {
        OmegaRule::D => 1.0,
        OmegaRule::ThreeD => 3.0,
    };
    let omega = d_n.iter().map(|d| factor * d).collect();
    Ok(TuningValues {
        a_n,
        b_n,
        d_n,
        e_n,
        omega,
        mu,
        n0,
        alpha: k.alpha,
        omega_rule: k.omega_rule,
        block_length: block,
        max_block_count: max_block,
        increments_bounded: bounded,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{CovariateField, EventLog, Horizon};

    #[test]
    fn mu_one_is_admissible() {
        assert!((phi(1.0) - (std::f64::consts::E - 2.0)).abs() < 1e-15);
        assert!(TuningConstants::default().validate().is_ok());
        assert!(TuningConstants { mu: 2.5, ..Default::default() }.validate().is_err());
    }

    #[test]
    fn windowed_excitation_matches_direct_sum() {
        let src = [0.5, 1.0, 1.2, 3.0, 3.1];
        let q = [0.2, 1.0, 1.5, 3.05, 6.0];
        let got = excitation_at(&src, &q, 0.7, 2.0);
        for (k, &t) in q.iter().enumerate() {
            let want: f64 = src.iter().filter(|&&s| s < t && t - s <= 2.0).map(|&s| (-0.7 * (t - s)).exp()).sum();
            assert!((got[k] - want).abs() < 1e-14);
        }
    }

    #[test]
    fn no_events_gives_positive_floors() {
        let ev = EventLog::empty(3, 50.0).unwrap();
        let cov = CovariateField::zeros(3, 1, 50.0).unwrap();
        let data = FitData::new(&ev, &cov, Horizon::default()).unwrap();
        let tv = theory_tuning(&data, None, &TuningConstants::default()).unwrap();
        assert!(tv.a_n.is_finite() && tv.a_n > 0.0);
        assert!(tv.d_n.iter().all(|d| d.is_finite() && *d > 0.0));
        assert!(tv.increments_bounded);
    }
}
