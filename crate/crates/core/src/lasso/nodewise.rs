//! Node-wise lasso on the columns of `Σ²`, giving the rows of an
//! approximate inverse of a positive semi-definite `Σ`.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::problem::{LassoWorkspace, Sign, SolverPath, DEFAULT_TOL};
use crate::error::{Error, Result};

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct NodewiseResult {
    pub column: usize,
    /// Coefficients on the other `d − 1` columns, in their original order.
    pub v: Vec<f64>,
    pub tau: f64,
    pub sigma: f64,
    pub kkt_residual: f64,
    pub path: SolverPath,
}

impl NodewiseResult {
    /// Row `j` of the approximate inverse of `Σ²`: `(−v with 1 at j) / τ`.
    pub fn inverse_row(&self) -> Vec<f64> {
        let d = self.v.len() + 1;
        let mut row = Vec::with_capacity(d);
        let mut it = self.v.iter();
        for k in 0..d {
            row.push(if k == self.column { 1.0 } else { -it.next().unwrap() } / self.tau);
        }
        row
    }
}

/// Minimize `‖Σ_{·j} − Σ_{·,−j}v‖² + 2σ‖v_P‖₁`, where `P` excludes the
/// indices in `unpenalized`, and return `v` with
/// `τ = (Σ²)_{jj} − (Σ²)_{j,−j}v`.
pub fn nodewise_lasso(sigma: &DMatrix<f64>, j: usize, sigma_j: f64, unpenalized: &[usize]) -> Result<NodewiseResult> {
    let sq = square(sigma)?;
    nodewise_on_square(&sq, j, sigma_j, unpenalized)
}

/// One node-wise regression per requested column, in parallel.
pub fn nodewise_batch(
    sigma: &DMatrix<f64>,
    columns: &[usize],
    sigma_j: &[f64],
    unpenalized: &[usize],
) -> Result<Vec<NodewiseResult>> {
    crate::error::dim_check("sigma_j length", columns.len(), sigma_j.len())?;
    let sq = square(sigma)?;
    columns
        .par_iter()
        .zip(sigma_j.par_iter())
        .map(|(&j, &s)| nodewise_on_square(&sq, j, s, unpenalized))
        .collect()
}

fn square(sigma: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if !sigma.is_square() {
        return Err(Error::Dimension(format!("Σ is {}×{}", sigma.nrows(), sigma.ncols())));
    }
    let sq = sigma * sigma;
    Ok((&sq + sq.transpose()) * 0.5)
}

fn nodewise_on_square(sq: &DMatrix<f64>, j: usize, sigma_j: f64, unpenalized: &[usize]) -> Result<NodewiseResult> {
    let d = sq.nrows();
    if j >= d {
        return Err(Error::Dimension(format!("column {j} out of range for dimension {d}")));
    }
    if !(sigma_j > 0.0) || !sigma_j.is_finite() {
        return Err(Error::InvalidInput(format!("sigma_j must be positive, got {sigma_j}")));
    }
    let others: Vec<usize> = (0..d).filter(|&k| k != j).collect();
    let m = others.len();
    let q = DMatrix::from_fn(m, m, |r, c| sq[(others[r], others[c])]);
    let b = DVector::from_iterator(m, others.iter().map(|&k| sq[(k, j)]));
    let weights: Vec<f64> = others.iter().map(|k| if unpenalized.contains(k) { 0.0 } else { sigma_j }).collect();
    let ws = LassoWorkspace::new(&q, &weights, &vec![Sign::Free; m], DEFAULT_TOL * sq.amax().max(1.0))?;
    let sol = ws.solve(&b)?;
    let tau = sq[(j, j)] - b.iter().zip(&sol.x).map(|(a, v)| a * v).sum::<f64>();
    Ok(NodewiseResult { column: j, v: sol.x, tau, sigma: sigma_j, kkt_residual: sol.kkt_residual, path: sol.path })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};

    #[test]
    fn identity_gives_unit_tau() {
        let r = nodewise_lasso(&DMatrix::identity(4, 4), 2, 0.3, &[0]).unwrap();
        assert!(r.v.iter().all(|&v| v == 0.0));
        assert!((r.tau - 1.0).abs() < 1e-15);
        assert_eq!(r.inverse_row(), vec![0.0, 0.0, 1.0, 0.0]);
    }

    #[test]
    fn tau_identity_when_all_penalized() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        let b = DMatrix::from_fn(5, 4, |_, _| rng.random_range(-1.0..1.0));
        let s = b.transpose() * &b;
        let r = nodewise_lasso(&s, 1, 0.2, &[]).unwrap();
        let others = [0usize, 2, 3];
        let mut resid = 0.0;
        for row in 0..4 {
            let fit: f64 = others.iter().zip(&r.v).map(|(&k, v)| s[(row, k)] * v).sum();
            resid += (s[(row, 1)] - fit).powi(2);
        }
        let l1: f64 = r.v.iter().map(|v| v.abs()).sum();
        assert!((r.tau - (resid + 0.2 * l1)).abs() < 1e-8);
    }

    #[test]
    fn rejects_nonpositive_sigma() {
        assert!(nodewise_lasso(&DMatrix::identity(2, 2), 0, 0.0, &[]).is_err());
    }
}
