//! Cyclic coordinate descent for `xᵀQx − 2bᵀx + 2Σ w_k|x_k|`.

pub fn objective(q: &[Vec<f64>], b: &[f64], w: &[f64], x: &[f64]) -> f64 {
    let d = x.len();
    let mut f = 0.0;
    for i in 0..d {
        for j in 0..d {
            f += x[i] * q[i][j] * x[j];
        }
        f += -2.0 * b[i] * x[i] + 2.0 * w[i] * x[i].abs();
    }
    f
}

/// `nonneg[k]` restricts coordinate k to `[0, ∞)`.
pub fn cd_solve(q: &[Vec<f64>], b: &[f64], w: &[f64], nonneg: &[bool]) -> Vec<f64> {
    let d = b.len();
    let mut x = vec![0.0; d];
    for _sweep in 0..1_000_000 {
        let mut change: f64 = 0.0;
        for k in 0..d {
            if q[k][k] <= 0.0 {
                continue;
            }
            let mut r = b[k];
            for l in 0..d {
                if l != k {
                    r -= q[k][l] * x[l];
                }
            }
            let mut z = if r > w[k] {
                (r - w[k]) / q[k][k]
            } else if r < -w[k] {
                (r + w[k]) / q[k][k]
            } else {
                0.0
            };
            if nonneg[k] && z < 0.0 {
                z = 0.0;
            }
            change = change.max((z - x[k]).abs());
            x[k] = z;
        }
        if change < 1e-15 {
            break;
        }
    }
    x
}

/// `‖Y − Xγ‖² + λ‖γ‖₁` with X given by rows.
pub fn ls_lasso_objective(y: &[f64], x: &[Vec<f64>], lambda: f64, g: &[f64]) -> f64 {
    let mut f = 0.0;
    for (yi, row) in y.iter().zip(x) {
        let fit: f64 = row.iter().zip(g).map(|(a, b)| a * b).sum();
        f += (yi - fit).powi(2);
    }
    f + lambda * g.iter().map(|v| v.abs()).sum::<f64>()
}

pub fn ls_lasso_cd(y: &[f64], x: &[Vec<f64>], lambda: f64) -> Vec<f64> {
    let q_dim = x[0].len();
    let mut q = vec![vec![0.0; q_dim]; q_dim];
    let mut b = vec![0.0; q_dim];
    for (yi, row) in y.iter().zip(x) {
        for i in 0..q_dim {
            b[i] += row[i] * yi;
            for j in 0..q_dim {
                q[i][j] += row[i] * row[j];
            }
        }
    }
    cd_solve(&q, &b, &vec![lambda / 2.0; q_dim], &vec![false; q_dim])
}
