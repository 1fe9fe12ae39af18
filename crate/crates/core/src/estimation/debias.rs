//! One-step correction of θ using node-wise lasso rows of an approximate
//! inverse of Σ, and the third-stage refit of (C, α) at the corrected θ.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::derivatives::{derivatives_from_stats, Layout};
use super::stage1::{profile_at, FitData, Stage1Result, ThetaBox};
use crate::error::{Error, Result};
use crate::lasso::{nodewise_batch, RowOptions, RowSolution};
use crate::model::{HawkesParams, Theta};
use crate::stats::compute_deriv_stats;

/// `σⱼ = c·sqrt(log D / (nT))·(Σ²)ⱼⱼ`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SigmaRule {
    pub c: f64,
}

impl Default for SigmaRule {
    fn default() -> Self {
        Self { c: 1.0 }
    }
}

impl SigmaRule {
    pub fn sigma(&self, sq_jj: f64, dim: usize, nt: f64) -> f64 {
        self.c * ((dim as f64).ln() / nt).sqrt() * sq_jj
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DebiasRow {
    pub index: usize,
    pub sigma: f64,
    pub tau: f64,
    /// `σⱼ/τⱼ`, or infinity when τⱼ ≤ 0.
    pub bound: f64,
    /// `‖Θ_{j·}Σ − eⱼ‖_∞`
    pub realized: f64,
    pub kkt_residual: f64,
    /// τⱼ ≤ 0: the coordinate is left uncorrected.
    pub flagged: bool,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DebiasResult {
    pub theta_check: Theta,
    pub theta_bar: Theta,
    pub score_theta: Vec<f64>,
    pub correction: Vec<f64>,
    pub rows: Vec<DebiasRow>,
    /// `‖Θ_{θ,n}Σ − J‖_max`
    pub realized: f64,
    pub max_bound: f64,
}

/// θ̄ = θ̌ − Θ_θ·score with Θ_θ = Θ̃_θΣ from the node-wise lasso on Σ².
pub fn debias_theta(
    sigma: &DMatrix<f64>,
    score: &DVector<f64>,
    theta_check: &Theta,
    layout: Layout,
    nt: f64,
    rule: SigmaRule,
) -> Result<DebiasResult> {
    let d = layout.dim();
    if sigma.nrows() != d || sigma.ncols() != d || score.len() != d {
        return Err(Error::Dimension(format!("Σ and score must have dimension {d}")));
    }
    let idx = layout.theta_indices();
    let sq = sigma * sigma;
    let sigmas: Vec<f64> = idx.iter().map(|&j| rule.sigma(sq[(j, j)], d, nt).max(f64::MIN_POSITIVE)).collect();
    let nw = nodewise_batch(sigma, &idx, &sigmas, &idx)?;
    let mut rows = Vec::with_capacity(idx.len());
    let mut correction = vec![0.0; idx.len()];
    for (r, res) in nw.iter().enumerate() {
        let j = idx[r];
        let flagged = !(res.tau > 0.0);
        let (bound, realized) = if flagged {
            (f64::INFINITY, f64::NAN)
        } else {
            let tilde = DVector::from_vec(res.inverse_row());
            let theta_row = sigma.tr_mul(&tilde);
            correction[r] = theta_row.dot(score);
            let prod = sigma.tr_mul(&theta_row);
            let realized = (0..d).map(|k| (prod[k] - if k == j { 1.0 } else { 0.0 }).abs()).fold(0.0, f64::max);
            (res.sigma / res.tau, realized)
        };
        rows.push(DebiasRow { index: j, sigma: res.sigma, tau: res.tau, bound, realized, kkt_residual: res.kkt_residual, flagged });
    }
    let check = theta_check.to_vec();
    let bar: Vec<f64> = check.iter().zip(&correction).map(|(t, c)| t - c).collect();
    let realized = rows.iter().filter(|r| !r.flagged).map(|r| r.realized).fold(0.0, f64::max);
    let max_bound = rows.iter().filter(|r| !r.flagged).map(|r| r.bound).fold(0.0, f64::max);
    Ok(DebiasResult {
        theta_check: theta_check.clone(),
        theta_bar: Theta::from_slice(&bar),
        score_theta: idx.iter().map(|&j| score[j]).collect(),
        correction,
        rows,
        realized,
        max_bound,
    })
}

/// Σ and the score at the first-stage estimate over the data window.
pub fn stage2_debias(stage1: &Stage1Result, data: &FitData, rule: SigmaRule) -> Result<DebiasResult> {
    let kernel = data.horizon.kernel(stage1.theta.gamma)?;
    let ds = compute_deriv_stats(data.events, data.covariates, &stage1.theta, &kernel, data.window)?;
    let (score, sigma) = derivatives_from_stats(&ds, &stage1.c, &stage1.alpha, true)?;
    let layout = Layout::new(data.p(), data.n());
    let nt = data.n() as f64 * data.window.len();
    debias_theta(&sigma.expect("requested"), &score, &stage1.theta, layout, nt, rule)
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Stage3Result {
    pub theta: Theta,
    /// θ̄ left the box and was projected back.
    pub clipped: bool,
    #[serde(with = "crate::serde_matrix")]
    pub c: DMatrix<f64>,
    pub alpha: Vec<f64>,
    pub criterion: f64,
    pub rows: Vec<RowSolution>,
}

pub fn stage3_fit(data: &FitData, theta_bar: &Theta, omega: &[f64], theta_box: &ThetaBox, opts: RowOptions) -> Result<Stage3Result> {
    if theta_bar.to_vec().iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidInput("de-biased θ is not finite".into()));
    }
    let (theta, clipped) = theta_box.clip(theta_bar);
    let pr = profile_at(data, &theta, omega, opts)?;
    Ok(Stage3Result { c: pr.c(), alpha: pr.alpha(), criterion: pr.value, rows: pr.rows, theta, clipped })
}

/// Parameters assembled from a fit, with the kernel of the fit's horizon rule.
pub fn fitted_params(data: &FitData, theta: &Theta, c: &DMatrix<f64>, alpha: &[f64]) -> Result<HawkesParams> {
    HawkesParams::new(c.clone(), alpha.to_vec(), theta.beta.clone(), data.horizon.kernel(theta.gamma)?)
}
