//! Optimality certificate for `xᵀQx − 2bᵀx + 2Σw|x|` under sign constraints.

use nalgebra::{DMatrix, DVector};

/// Largest violation of the subgradient conditions, using `g = Qx − b`:
/// active free `|g + w·sign x|`, inactive free `(|g| − w)₊`, active
/// non-negative `|g + w|`, inactive non-negative `(−g − w)₊`, negative
/// non-negative coordinates count their magnitude.
pub fn kkt_residual(
    q: &DMatrix<f64>,
    b: &DVector<f64>,
    w: &[f64],
    nonneg: &[bool],
    x: &DVector<f64>,
    grad: Option<&DVector<f64>>,
) -> f64 {
    let owned;
    let g = match grad {
        Some(g) => g,
        None => {
            owned = q * x - b;
            &owned
        }
    };
    let mut worst: f64 = 0.0;
    for k in 0..x.len() {
        let v = if nonneg[k] {
            if x[k] > 0.0 {
                (g[k] + w[k]).abs()
            } else if x[k] == 0.0 {
                (-g[k] - w[k]).max(0.0)
            } else {
                -x[k] + (g[k] + w[k]).abs()
            }
        } else if x[k] != 0.0 {
            (g[k] + w[k] * x[k].signum()).abs()
        } else {
            (g[k].abs() - w[k]).max(0.0)
        };
        worst = worst.max(v);
    }
    worst
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn certifies_soft_threshold() {
        let q = DMatrix::from_element(1, 1, 1.0);
        let b = DVector::from_element(1, 2.0);
        assert!(kkt_residual(&q, &b, &[0.5], &[true], &DVector::from_element(1, 1.5), None) < 1e-15);
        assert!((kkt_residual(&q, &b, &[0.5], &[true], &DVector::from_element(1, 0.0), None) - 1.5).abs() < 1e-15);
        assert!(kkt_residual(&q, &DVector::from_element(1, -2.0), &[0.5], &[true], &DVector::zeros(1), None) == 0.0);
    }
}
