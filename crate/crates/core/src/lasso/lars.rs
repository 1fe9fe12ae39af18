//! Least-angle regression with the lasso modification, on Gram form.
//!
//! Minimizes `‖y − Xβ‖² + 2·level·‖β‖₁` given `XᵀX` and `Xᵀy`. Coordinates
//! flagged non-negative only enter with positive correlation (the positive
//! lasso); every coordinate leaves the active set when it reaches zero.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

#[derive(Clone, Debug)]
pub struct LarsOutput {
    pub coef: DVector<f64>,
    pub active: Vec<usize>,
    pub steps: usize,
}

pub fn lars_gram(
    gram: &DMatrix<f64>,
    corr: &DVector<f64>,
    level: f64,
    nonneg: &[bool],
    max_steps: usize,
) -> Result<LarsOutput> {
    let q = corr.len();
    let mut beta = DVector::zeros(q);
    let mut c = corr.clone();
    let score = |k: usize, ck: f64| if nonneg[k] { ck } else { ck.abs() };
    let (mut first, mut big_c) = (usize::MAX, 0.0);
    for k in 0..q {
        let s = score(k, c[k]);
        if s > big_c {
            big_c = s;
            first = k;
        }
    }
    if big_c <= level || first == usize::MAX {
        return Ok(LarsOutput { coef: beta, active: Vec::new(), steps: 0 });
    }
    let eps = 1e-13 * big_c.max(1e-300);
    let mut active = vec![first];
    let mut sign = vec![0.0; q];
    sign[first] = c[first].signum();
    let mut in_active = vec![false; q];
    in_active[first] = true;
    let mut steps = 0;

    loop {
        steps += 1;
        if steps > max_steps {
            return Err(Error::NonConvergence(format!("LARS exceeded {max_steps} steps")));
        }
        let na = active.len();
        let gaa = DMatrix::from_fn(na, na, |r, s| gram[(active[r], active[s])]);
        let sa = DVector::from_iterator(na, active.iter().map(|&k| sign[k]));
        let chol = gaa
            .cholesky()
            .ok_or_else(|| Error::Singular(format!("active Gram block of size {na} is singular")))?;
        let d = chol.solve(&sa);
        let mut a = DVector::zeros(q);
        for (r, &k) in active.iter().enumerate() {
            a.axpy(d[r], &gram.column(k), 1.0);
        }

        let mut step = big_c - level;
        let mut event: Option<(usize, bool)> = None; // (coordinate, joins)
        for k in 0..q {
            if in_active[k] {
                continue;
            }
            let up = 1.0 - a[k];
            if up > 1e-12 {
                let g = (big_c - c[k]) / up;
                if g > eps && g < step {
                    step = g;
                    event = Some((k, true));
                }
            }
            if !nonneg[k] {
                let down = 1.0 + a[k];
                if down > 1e-12 {
                    let g = (big_c + c[k]) / down;
                    if g > eps && g < step {
                        step = g;
                        event = Some((k, true));
                    }
                }
            }
        }
        for (r, &k) in active.iter().enumerate() {
            if d[r] != 0.0 {
                let g = -beta[k] / d[r];
                if g > eps && g < step {
                    step = g;
                    event = Some((k, false));
                }
            }
        }

        for (r, &k) in active.iter().enumerate() {
            beta[k] += step * d[r];
        }
        c.axpy(-step, &a, 1.0);
        big_c -= step;

        match event {
            None => break,
            Some((k, true)) => {
                in_active[k] = true;
                sign[k] = c[k].signum();
                active.push(k);
            }
            Some((k, false)) => {
                beta[k] = 0.0;
                in_active[k] = false;
                active.retain(|&j| j != k);
                if active.is_empty() {
                    // restart from the largest remaining correlation
                    let (mut best, mut bc) = (usize::MAX, 0.0);
                    for j in 0..q {
                        let s = score(j, c[j]);
                        if s > bc {
                            bc = s;
                            best = j;
                        }
                    }
                    if best == usize::MAX || bc <= level {
                        break;
                    }
                    active.push(best);
                    in_active[best] = true;
                    sign[best] = c[best].signum();
                }
            }
        }
    }
    let mut act: Vec<usize> = (0..q).filter(|&k| beta[k] != 0.0).collect();
    act.sort_unstable();
    Ok(LarsOutput { coef: beta, active: act, steps })
}
