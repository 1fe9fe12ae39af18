//! Quadratic lasso `xᵀQx − 2bᵀx + 2Σ w_k|x_k|` with per-coordinate sign
//! constraints, solved through the least-squares reformulation and LARS.
//!
//! With `Q = LᵀL` (`L = Q^{1/2}`), the synthetic regression `Y = L⁺b`,
//! `X = L` has `‖Y − Xx‖² = xᵀQx − 2bᵀx + const` whenever `b` lies in the
//! range of `Q`. Centring by `X̃` then gives LARS its required form.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::cd::coordinate_descent;
use super::kkt::kkt_residual;
use super::lars::lars_gram;
use super::xtilde::{build_xtilde, center_transform};
use crate::error::{dim_check, Error, Result};
use crate::stats::psd_sqrt;

pub const DEFAULT_TOL: f64 = 1e-8;
pub const DEFAULT_RANK_TOL: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Sign {
    Free,
    NonNegative,
}

#[derive(Clone, Debug)]
pub struct QuadraticLassoProblem {
    pub q: DMatrix<f64>,
    pub b: DVector<f64>,
    pub weights: Vec<f64>,
    pub signs: Vec<Sign>,
}

impl QuadraticLassoProblem {
    pub fn new(q: DMatrix<f64>, b: DVector<f64>, weights: Vec<f64>, signs: Vec<Sign>) -> Result<Self> {
        let d = b.len();
        dim_check("Q rows", d, q.nrows())?;
        dim_check("Q cols", d, q.ncols())?;
        dim_check("weights", d, weights.len())?;
        dim_check("signs", d, signs.len())?;
        if weights.iter().any(|&w| !(w >= 0.0) || !w.is_finite()) {
            return Err(Error::InvalidInput("penalty weights must be finite and non-negative".into()));
        }
        let scale = q.amax().max(1e-300);
        if (&q - q.transpose()).amax() > 1e-10 * scale {
            return Err(Error::NotPsd("Q is not symmetric".into()));
        }
        Ok(Self { q, b, weights, signs })
    }

    pub fn dim(&self) -> usize {
        self.b.len()
    }

    pub fn objective(&self, x: &DVector<f64>) -> f64 {
        let pen: f64 = x.iter().zip(&self.weights).map(|(v, w)| w * v.abs()).sum();
        (&self.q * x).dot(x) - 2.0 * self.b.dot(x) + 2.0 * pen
    }

    pub fn kkt(&self, x: &DVector<f64>) -> f64 {
        kkt_residual(&self.q, &self.b, &self.weights, &self.nonneg(), x, None)
    }

    fn nonneg(&self) -> Vec<bool> {
        self.signs.iter().map(|s| *s == Sign::NonNegative).collect()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolverPath {
    /// LARS on the centred reformulation, then coordinate-descent polish.
    Lars,
    /// Active-set method for problems whose coordinates are all non-negative.
    ActiveSet,
    /// Coordinate descent alone (LARS unavailable or failed).
    CoordinateDescent,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct LassoSolution {
    pub x: Vec<f64>,
    pub active: Vec<usize>,
    pub objective: f64,
    pub kkt_residual: f64,
    pub path: SolverPath,
    pub lars_steps: usize,
    pub cd_sweeps: usize,
}

/// Everything about a problem that does not depend on `b`: the partition
/// into penalized and free unpenalized coordinates, the weight rescaling and
/// the centred synthetic design. Reused when only `b` changes.
pub struct LassoWorkspace {
    q: DMatrix<f64>,
    weights: Vec<f64>,
    nonneg: Vec<bool>,
    pen: Vec<usize>,
    unpen: Vec<usize>,
    /// Q_UU⁻¹ Q_UP and Q_UU⁻¹
    uu_inv_up: DMatrix<f64>,
    uu_inv: DMatrix<f64>,
    /// rescaling d_k = w_k / level on penalized coordinates
    scale: Vec<f64>,
    level: f64,
    inv_half: DMatrix<f64>,
    xt: DMatrix<f64>,
    /// centred design X̄ = X̃L and its Gram matrix
    xbar: DMatrix<f64>,
    gram: DMatrix<f64>,
    tol: f64,
    mode: Mode,
}

enum Mode {
    Lars,
    ActiveSet,
    Cd,
    /// nothing penalized and every coordinate free
    Direct,
}

impl LassoWorkspace {
    pub fn new(q: &DMatrix<f64>, weights: &[f64], signs: &[Sign], tol: f64) -> Result<Self> {
        let d = q.nrows();
        let nonneg: Vec<bool> = signs.iter().map(|s| *s == Sign::NonNegative).collect();
        let pen: Vec<usize> = (0..d).filter(|&k| weights[k] > 0.0).collect();
        let unpen: Vec<usize> = (0..d).filter(|&k| weights[k] == 0.0).collect();
        let check = psd_sqrt(q, DEFAULT_RANK_TOL)?;
        if check.min_eigenvalue < -1e-8 * check.max_eigenvalue.max(1e-300) {
            return Err(Error::NotPsd(format!("smallest eigenvalue {:.3e}", check.min_eigenvalue)));
        }
        let mut ws = Self {
            q: q.clone(),
            weights: weights.to_vec(),
            nonneg: nonneg.clone(),
            pen: pen.clone(),
            unpen: unpen.clone(),
            uu_inv_up: DMatrix::zeros(0, 0),
            uu_inv: DMatrix::zeros(0, 0),
            scale: Vec::new(),
            level: 0.0,
            inv_half: DMatrix::zeros(0, 0),
            xt: DMatrix::zeros(0, 0),
            xbar: DMatrix::zeros(0, 0),
            gram: DMatrix::zeros(0, 0),
            tol,
            mode: Mode::Cd,
        };
        let unpen_nonneg = unpen.iter().any(|&k| nonneg[k]);
        if unpen_nonneg {
            ws.mode = if nonneg.iter().all(|&s| s) { Mode::ActiveSet } else { Mode::Cd };
            return Ok(ws);
        }
        if pen.is_empty() {
            ws.mode = Mode::Direct;
            return Ok(ws);
        }
        // partial out free unpenalized coordinates
        let sub = |rows: &[usize], cols: &[usize]| DMatrix::from_fn(rows.len(), cols.len(), |r, c| q[(rows[r], cols[c])]);
        let q_pp = sub(&pen, &pen);
        let q_reduced = if unpen.is_empty() {
            q_pp
        } else {
            let q_uu = sub(&unpen, &unpen);
            let q_up = sub(&unpen, &pen);
            let Some(chol) = q_uu.cholesky() else {
                return Ok(ws);
            };
            ws.uu_inv = chol.inverse();
            ws.uu_inv_up = &ws.uu_inv * &q_up;
            let r = q_pp - q_up.transpose() * &ws.uu_inv_up;
            (&r + r.transpose()) * 0.5
        };
        ws.level = pen.iter().map(|&k| weights[k]).fold(0.0, f64::max);
        ws.scale = pen.iter().map(|&k| weights[k] / ws.level).collect();
        let m = pen.len();
        let qz = DMatrix::from_fn(m, m, |r, c| q_reduced[(r, c)] / (ws.scale[r] * ws.scale[c]));
        if m < 2 {
            // the centring matrix needs at least two rows; a scalar problem
            // is a soft threshold and is handled by the polish
            ws.mode = Mode::Cd;
            return Ok(ws);
        }
        let root = psd_sqrt(&qz, DEFAULT_RANK_TOL)?;
        let (_, xbar) = center_transform(&DVector::zeros(m), &root.half)?;
        ws.xt = build_xtilde(m)?;
        ws.gram = xbar.transpose() * &xbar;
        ws.xbar = xbar;
        ws.inv_half = root.inv_half;
        ws.mode = Mode::Lars;
        Ok(ws)
    }

    pub fn solve(&self, b: &DVector<f64>) -> Result<LassoSolution> {
        self.solve_scaled(b, 1.0, None)
    }

    /// Solve with every penalty weight multiplied by `factor`, optionally
    /// polishing from a warm start when the LARS path is not available.
    pub fn solve_scaled(&self, b: &DVector<f64>, factor: f64, warm: Option<&DVector<f64>>) -> Result<LassoSolution> {
        let d = self.q.nrows();
        dim_check("b length", d, b.len())?;
        if !(factor > 0.0) || !factor.is_finite() {
            return Err(Error::InvalidInput(format!("penalty factor must be positive, got {factor}")));
        }
        let weights: Vec<f64> = self.weights.iter().map(|w| w * factor).collect();
        let zero = DVector::zeros(d);
        let (x0, path, lars_steps) = match self.mode {
            Mode::Direct => {
                let x = self
                    .q
                    .clone()
                    .cholesky()
                    .map(|c| c.solve(b))
                    .unwrap_or_else(|| psd_pinv_solve(&self.q, b));
                (x, SolverPath::Lars, 0)
            }
            Mode::ActiveSet => {
                let f = DVector::from_iterator(d, (0..d).map(|k| b[k] - weights[k]));
                let x = nonneg_qp(&self.q, &f, 0.1 * self.tol)?;
                (x, SolverPath::ActiveSet, 0)
            }
            Mode::Cd => (warm.cloned().unwrap_or(zero), SolverPath::CoordinateDescent, 0),
            Mode::Lars => match self.lars(b, factor * self.level) {
                Ok((x, steps)) => (x, SolverPath::Lars, steps),
                Err(_) => (warm.cloned().unwrap_or(zero), SolverPath::CoordinateDescent, 0),
            },
        };
        let (x, sweeps) = coordinate_descent(&self.q, b, &weights, &self.nonneg, x0, self.tol)?;
        let kkt = kkt_residual(&self.q, b, &weights, &self.nonneg, &x, None);
        let pen: f64 = x.iter().zip(&weights).map(|(v, w)| w * v.abs()).sum();
        let objective = (&self.q * &x).dot(&x) - 2.0 * b.dot(&x) + 2.0 * pen;
        let active = (0..d).filter(|&k| x[k] != 0.0).collect();
        Ok(LassoSolution { x: x.iter().copied().collect(), active, objective, kkt_residual: kkt, path, lars_steps, cd_sweeps: sweeps })
    }

    fn lars(&self, b: &DVector<f64>, level: f64) -> Result<(DVector<f64>, usize)> {
        let d = self.q.nrows();
        let m = self.pen.len();
        // reduced linear term after partialling out the free coordinates
        let mut b_red = DVector::from_iterator(m, self.pen.iter().map(|&k| b[k]));
        let mut b_u = DVector::zeros(self.unpen.len());
        if !self.unpen.is_empty() {
            b_u = DVector::from_iterator(self.unpen.len(), self.unpen.iter().map(|&k| b[k]));
            b_red -= self.uu_inv_up.transpose() * &b_u;
        }
        let bz = DVector::from_iterator(m, (0..m).map(|r| b_red[r] / self.scale[r]));
        let y = &self.inv_half * &bz;
        let ybar = &self.xt * y;
        let corr = self.xbar.transpose() * &ybar;
        let nonneg: Vec<bool> = self.pen.iter().map(|&k| self.nonneg[k]).collect();
        let out = lars_gram(&self.gram, &corr, level, &nonneg, 8 * d.max(1))?;
        let mut x = DVector::zeros(d);
        let mut xp = DVector::zeros(m);
        for r in 0..m {
            xp[r] = out.coef[r] / self.scale[r];
            x[self.pen[r]] = xp[r];
        }
        if !self.unpen.is_empty() {
            let xu = &self.uu_inv * &b_u - &self.uu_inv_up * &xp;
            for (r, &k) in self.unpen.iter().enumerate() {
                x[k] = xu[r];
            }
        }
        Ok((x, out.steps))
    }
}

fn psd_pinv_solve(q: &DMatrix<f64>, b: &DVector<f64>) -> DVector<f64> {
    match psd_sqrt(q, DEFAULT_RANK_TOL) {
        Ok(r) => &r.inv_half * (&r.inv_half * b),
        Err(_) => DVector::zeros(b.len()),
    }
}

pub fn solve_quadratic_lasso(problem: &QuadraticLassoProblem, tol: f64) -> Result<LassoSolution> {
    LassoWorkspace::new(&problem.q, &problem.weights, &problem.signs, tol)?.solve(&problem.b)
}

/// Lasso `‖y − Xg‖² + λ‖g‖₁` without intercept, solved by LARS on the
/// centred data `(X̃y, X̃X)` with no further polishing.
pub fn lars_lasso(y: &DVector<f64>, x: &DMatrix<f64>, lambda: f64, nonneg: &[bool]) -> Result<DVector<f64>> {
    dim_check("sign constraints", x.ncols(), nonneg.len())?;
    if !(lambda > 0.0) {
        return Err(Error::InvalidInput(format!("lambda must be positive, got {lambda}")));
    }
    let (ybar, xbar) = center_transform(y, x)?;
    let gram = xbar.transpose() * &xbar;
    let corr = xbar.transpose() * &ybar;
    Ok(lars_gram(&gram, &corr, 0.5 * lambda, nonneg, 8 * x.ncols().max(1))?.coef)
}

/// Active-set method for `min xᵀHx − 2fᵀx` over `x ≥ 0`: grow the passive
/// set by the coordinate with the largest positive gradient, step back to
/// feasibility when a passive coordinate would turn negative.
pub fn nonneg_qp(h: &DMatrix<f64>, f: &DVector<f64>, tol: f64) -> Result<DVector<f64>> {
    let d = f.len();
    let mut x = DVector::zeros(d);
    let mut passive = vec![false; d];
    let max_outer = 10 * d + 10;
    for _ in 0..max_outer {
        let g = f - h * &x;
        let mut best = None;
        let mut gmax = tol;
        for k in 0..d {
            if !passive[k] && g[k] > gmax {
                gmax = g[k];
                best = Some(k);
            }
        }
        let Some(j) = best else {
            return Ok(x);
        };
        passive[j] = true;
        for _inner in 0..=d {
            let idx: Vec<usize> = (0..d).filter(|&k| passive[k]).collect();
            let hp = DMatrix::from_fn(idx.len(), idx.len(), |r, c| h[(idx[r], idx[c])]);
            let fp = DVector::from_iterator(idx.len(), idx.iter().map(|&k| f[k]));
            let z = match hp.cholesky() {
                Some(ch) => ch.solve(&fp),
                None => {
                    // singular passive block: drop the newest coordinate
                    passive[j] = false;
                    return Ok(x);
                }
            };
            if z.iter().all(|&v| v > 0.0) {
                for (r, &k) in idx.iter().enumerate() {
                    x[k] = z[r];
                }
                break;
            }
            let mut step: f64 = 1.0;
            for (r, &k) in idx.iter().enumerate() {
                if z[r] <= 0.0 {
                    let denom = x[k] - z[r];
                    if denom > 0.0 {
                        step = step.min(x[k] / denom);
                    }
                }
            }
            for (r, &k) in idx.iter().enumerate() {
                x[k] += step * (z[r] - x[k]);
                if x[k] <= 1e-15 * (1.0 + z[r].abs()) {
                    x[k] = 0.0;
                    passive[k] = false;
                }
            }
        }
    }
    Err(Error::NonConvergence("active-set iterations exhausted".into()))
}
