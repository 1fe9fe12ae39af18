//! Nelder–Mead simplex search inside a box. The search runs in unit
//! coordinates and every trial point is projected onto `[0, 1]^d`.

use serde::{Deserialize, Serialize};

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SimplexResult {
    pub x: Vec<f64>,
    pub value: f64,
    pub evals: usize,
    pub converged: bool,
}

pub const INITIAL_STEP: f64 = 0.1;

/// Minimize `f` over `lo ≤ x ≤ hi` from `x0`. Stops when the simplex has
/// unit-coordinate diameter at most `tol` and its values differ by at most
/// `tol·(1 + |f_best|)`, or after `max_evals` evaluations.
pub fn nelder_mead_box<F: FnMut(&[f64]) -> f64>(
    mut f: F,
    x0: &[f64],
    lo: &[f64],
    hi: &[f64],
    tol: f64,
    max_evals: usize,
) -> SimplexResult {
    let d = x0.len();
    let to_x = |u: &[f64]| -> Vec<f64> { (0..d).map(|k| lo[k] + u[k] * (hi[k] - lo[k])).collect() };
    let clamp = |u: &mut Vec<f64>| u.iter_mut().for_each(|v| *v = v.clamp(0.0, 1.0));
    let mut evals = 0;
    let mut eval = |u: &[f64], evals: &mut usize| {
        *evals += 1;
        let v = f(&to_x(u));
        if v.is_finite() { v } else { f64::INFINITY }
    };
    let u0: Vec<f64> = (0..d).map(|k| ((x0[k] - lo[k]) / (hi[k] - lo[k])).clamp(0.0, 1.0)).collect();
    if d == 0 {
        let v = eval(&u0, &mut evals);
        return SimplexResult { x: Vec::new(), value: v, evals, converged: true };
    }
    let mut simplex = vec![u0.clone()];
    for k in 0..d {
        let mut u = u0.clone();
        u[k] += if u[k] + INITIAL_STEP <= 1.0 { INITIAL_STEP } else { -INITIAL_STEP };
        simplex.push(u);
    }
    let mut vals: Vec<f64> = simplex.iter().map(|u| eval(u, &mut evals)).collect();
    let mut converged = false;
    while evals < max_evals {
        let mut order: Vec<usize> = (0..=d).collect();
        order.sort_by(|&a, &b| vals[a].total_cmp(&vals[b]));
        simplex = order.iter().map(|&i| simplex[i].clone()).collect();
        vals = order.iter().map(|&i| vals[i]).collect();
        let diam = simplex[1..]
            .iter()
            .map(|u| u.iter().zip(&simplex[0]).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max))
            .fold(0.0, f64::max);
        let spread = vals[d] - vals[0];
        if diam <= tol && spread <= tol * (1.0 + vals[0].abs()) {
            converged = true;
            break;
        }
        let centroid: Vec<f64> = (0..d).map(|k| simplex[..d].iter().map(|u| u[k]).sum::<f64>() / d as f64).collect();
        let along = |t: f64| -> Vec<f64> {
            let mut u: Vec<f64> = (0..d).map(|k| centroid[k] + t * (simplex[d][k] - centroid[k])).collect();
            clamp(&mut u);
            u
        };
        let ur = along(-1.0);
        let fr = eval(&ur, &mut evals);
        if fr < vals[0] {
            let ue = along(-2.0);
            let fe = eval(&ue, &mut evals);
            if fe < fr {
                simplex[d] = ue;
                vals[d] = fe;
            } else {
                simplex[d] = ur;
                vals[d] = fr;
            }
            continue;
        }
        if fr < vals[d - 1] {
            simplex[d] = ur;
            vals[d] = fr;
            continue;
        }
        let (uc, fc) = if fr < vals[d] {
            let u = along(-0.5);
            let v = eval(&u, &mut evals);
            (u, v)
        } else {
            let u = along(0.5);
            let v = eval(&u, &mut evals);
            (u, v)
        };
        if fc < vals[d].min(fr) {
            simplex[d] = uc;
            vals[d] = fc;
            continue;
        }
        // shrink toward the best vertex
        for i in 1..=d {
            let u: Vec<f64> = (0..d).map(|k| simplex[0][k] + 0.5 * (simplex[i][k] - simplex[0][k])).collect();
            vals[i] = eval(&u, &mut evals);
            simplex[i] = u;
        }
    }
    let best = (0..=d).min_by(|&a, &b| vals[a].total_cmp(&vals[b])).expect("non-empty simplex");
    SimplexResult { x: to_x(&simplex[best]), value: vals[best], evals, converged }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quadratic_interior_minimum() {
        let r = nelder_mead_box(|x| (x[0] - 1.0).powi(2) + 3.0 * (x[1] + 0.5).powi(2), &[4.0, 2.0], &[-5.0, -5.0], &[5.0, 5.0], 1e-9, 5000);
        assert!(r.converged);
        assert!((r.x[0] - 1.0).abs() < 1e-6 && (r.x[1] + 0.5).abs() < 1e-6);
    }

    #[test]
    fn minimum_on_the_boundary() {
        let r = nelder_mead_box(|x| (x[0] + 3.0).powi(2), &[0.5], &[-1.0], &[1.0], 1e-10, 2000);
        assert!((r.x[0] + 1.0).abs() < 1e-8);
    }
}
