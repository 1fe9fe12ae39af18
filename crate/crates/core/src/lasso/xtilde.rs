//! Orthonormal design with zero column sums, used to turn an intercept-free
//! least-squares lasso into the centred form that LARS expects.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// `X̃_m` with `X̃ᵀX̃ = I_m` and every column summing to zero.
///
/// Columns are paired; pair `k` carries the 2×2 block
/// `E = [[√6/6, −√2/2], [√6/6, √2/2]]` in rows `2k, 2k+1` and the row
/// `[−√6/3, 0]` further down. For odd `m` the last column holds `√2/2` and
/// `−√2/2`.
pub fn build_xtilde(m: usize) -> Result<DMatrix<f64>> {
    if m < 2 {
        return Err(Error::Domain(format!("centering matrix needs m >= 2, got {m}")));
    }
    let pairs = m / 2;
    let odd = m % 2 == 1;
    let rows = if odd { (3 * m + 1) / 2 } else { 3 * m / 2 };
    let s6 = 6f64.sqrt();
    let s2 = 2f64.sqrt();
    let mut x = DMatrix::zeros(rows, m);
    for k in 0..pairs {
        let (r, c) = (2 * k, 2 * k);
        x[(r, c)] = s6 / 6.0;
        x[(r, c + 1)] = -s2 / 2.0;
        x[(r + 1, c)] = s6 / 6.0;
        x[(r + 1, c + 1)] = s2 / 2.0;
    }
    let v_start = 2 * pairs + usize::from(odd);
    if odd {
        x[(2 * pairs, m - 1)] = s2 / 2.0;
    }
    for k in 0..pairs {
        x[(v_start + k, 2 * k)] = -s6 / 3.0;
    }
    if odd {
        x[(rows - 1, m - 1)] = -s2 / 2.0;
    }
    Ok(x)
}

/// `(X̃Y, X̃X)`: same Gram matrix and cross products as `(Y, X)` with
/// centred response and columns.
pub fn center_transform(y: &DVector<f64>, x: &DMatrix<f64>) -> Result<(DVector<f64>, DMatrix<f64>)> {
    if y.len() != x.nrows() {
        return Err(Error::Dimension(format!("response has {} rows, design {}", y.len(), x.nrows())));
    }
    let xt = build_xtilde(y.len())?;
    Ok((&xt * y, &xt * x))
}
