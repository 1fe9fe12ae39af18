//! Post-fit checks: an eigenvalue surrogate of the compatibility constant and
//! martingale residuals `N_i(T) − ∫λ_i`.

use nalgebra::{DMatrix, SymmetricEigen};

use crate::error::{Error, Result};
use crate::model::{CovariateField, EventLog, HawkesParams};
use crate::stats::{compensator_residuals, compute_stats, SuffStats, Window};

/// Smallest eigenvalue of `(1/T)[[V_ii, G_i·], [G_i·ᵀ, Γ]]`.
pub fn compatibility_diagnostic(stats: &SuffStats, i: usize) -> Result<f64> {
    let n = stats.n();
    if i >= n {
        return Err(Error::Dimension(format!("node {i} out of range")));
    }
    let t = stats.window.len();
    let m = DMatrix::from_fn(n + 1, n + 1, |r, q| {
        (match (r, q) {
            (0, 0) => stats.v_diag[i],
            (0, q) => stats.g[(i, q - 1)],
            (r, 0) => stats.g[(i, r - 1)],
            (r, q) => stats.gram[(r - 1, q - 1)],
        }) / t
    });
    Ok(SymmetricEigen::new(m).eigenvalues.min())
}

/// `N_i(T) − ∫₀ᵀ λ_i` per node at the given parameters.
pub fn residual_check(events: &EventLog, cov: &CovariateField, params: &HawkesParams) -> Result<Vec<f64>> {
    let stats = compute_stats(events, cov, &params.theta(), &params.kernel, Window::full(events))?;
    compensator_residuals(&stats, params)
}
