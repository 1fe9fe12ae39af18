use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// Symmetric square root and pseudo-inverse square root of a PSD matrix.
#[derive(Clone, Debug)]
pub struct PsdSqrt {
    pub half: DMatrix<f64>,
    pub inv_half: DMatrix<f64>,
    pub rank: usize,
    pub min_eigenvalue: f64,
    pub max_eigenvalue: f64,
}

/// `M Λ^{±1/2} Mᵀ` from the symmetric eigendecomposition, with eigenvalues
/// below `rank_tol · λ_max` treated as zero in both factors.
pub fn psd_sqrt(m: &DMatrix<f64>, rank_tol: f64) -> Result<PsdSqrt> {
    if !m.is_square() {
        return Err(Error::Dimension(format!("matrix is {}x{}", m.nrows(), m.ncols())));
    }
    let n = m.nrows();
    let scale = m.amax().max(1.0);
    let asym = (m - m.transpose()).amax();
    if asym > 1e-10 * scale {
        return Err(Error::NotPsd(format!("asymmetry {asym:.3e}")));
    }
    let sym = (m + m.transpose()) * 0.5;
    let eig = sym.symmetric_eigen();
    let lmax = eig.eigenvalues.iter().copied().fold(0.0, f64::max);
    let cut = rank_tol * lmax;
    let mut d_half = DMatrix::zeros(n, n);
    let mut d_inv = DMatrix::zeros(n, n);
    let mut rank = 0;
    for (k, &l) in eig.eigenvalues.iter().enumerate() {
        if l > cut && l > 0.0 {
            d_half[(k, k)] = l.sqrt();
            d_inv[(k, k)] = 1.0 / l.sqrt();
            rank += 1;
        }
    }
    let v = &eig.eigenvectors;
    Ok(PsdSqrt {
        half: v * d_half * v.transpose(),
        inv_half: v * d_inv * v.transpose(),
        rank,
        min_eigenvalue: eig.eigenvalues.min(),
        max_eigenvalue: lmax,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity() {
        let r = psd_sqrt(&DMatrix::identity(3, 3), 1e-12).unwrap();
        assert!((r.half - DMatrix::<f64>::identity(3, 3)).amax() < 1e-15);
        assert!((r.inv_half - DMatrix::<f64>::identity(3, 3)).amax() < 1e-15);
        assert_eq!(r.rank, 3);
    }

    #[test]
    fn rank_deficient_diagonal() {
        let m = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![4.0, 0.0]));
        let r = psd_sqrt(&m, 1e-12).unwrap();
        assert!((r.half - DMatrix::from_row_slice(2, 2, &[2.0, 0.0, 0.0, 0.0])).amax() < 1e-15);
        assert!((r.inv_half - DMatrix::from_row_slice(2, 2, &[0.5, 0.0, 0.0, 0.0])).amax() < 1e-15);
        assert_eq!(r.rank, 1);
    }

    #[test]
    fn reconstructs_gram() {
        let b = DMatrix::from_fn(5, 4, |i, j| ((i * 7 + j * 3) as f64).sin());
        let g = b.transpose() * &b;
        let r = psd_sqrt(&g, 1e-12).unwrap();
        let lmax = g.clone().symmetric_eigen().eigenvalues.max();
        assert!((&r.half * &r.half - &g).amax() <= 1e-10 * lmax);
    }

    #[test]
    fn rejects_asymmetric() {
        let m = DMatrix::from_row_slice(2, 2, &[1.0, 0.5, 0.0, 1.0]);
        assert!(matches!(psd_sqrt(&m, 1e-12), Err(Error::NotPsd(_))));
    }
}
