//! Cyclic coordinate descent with projection onto sign constraints.

use nalgebra::{DMatrix, DVector};

use super::kkt::kkt_residual;
use crate::error::{Error, Result};

pub const MAX_SWEEPS: usize = 100_000;

/// Minimize `xᵀQx − 2bᵀx + 2Σw|x|` from `x0` until the KKT residual is at
/// most `tol`. Returns the point and the number of sweeps.
pub fn coordinate_descent(
    q: &DMatrix<f64>,
    b: &DVector<f64>,
    w: &[f64],
    nonneg: &[bool],
    x0: DVector<f64>,
    tol: f64,
) -> Result<(DVector<f64>, usize)> {
    let d = b.len();
    let mut x = x0;
    for k in 0..d {
        if nonneg[k] && x[k] < 0.0 {
            x[k] = 0.0;
        }
    }
    // gradient half: Qx − b, kept up to date
    let mut g = q * &x - b;
    for sweep in 0..=MAX_SWEEPS {
        if kkt_residual(q, b, w, nonneg, &x, Some(&g)) <= tol {
            return Ok((x, sweep));
        }
        if sweep == MAX_SWEEPS {
            break;
        }
        for k in 0..d {
            let qkk = q[(k, k)];
            if qkk <= 0.0 {
                continue;
            }
            let r = qkk * x[k] - g[k];
            let mut z = if r > w[k] {
                (r - w[k]) / qkk
            } else if r < -w[k] {
                (r + w[k]) / qkk
            } else {
                0.0
            };
            if nonneg[k] && z < 0.0 {
                z = 0.0;
            }
            let delta = z - x[k];
            if delta != 0.0 {
                g.axpy(delta, &q.column(k), 1.0);
                x[k] = z;
            }
        }
        // refresh to stop rounding drift in the running gradient
        if sweep % 64 == 63 {
            g = q * &x - b;
        }
    }
    Err(Error::NonConvergence(format!(
        "coordinate descent did not reach KKT tolerance {tol:.1e} in {MAX_SWEEPS} sweeps"
    )))
}
