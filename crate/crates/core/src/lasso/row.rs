//! Per-node problem at fixed θ: minimize over `c ≥ 0`, `a ≥ 0`
//! `LS_i(c, a)/T + 2ω‖c‖₁ + 2π·a`, alternating a lasso step in `c` with a
//! closed-form step in `a`. The rows are independent given the statistics.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::kkt::kkt_residual;
use super::problem::{nonneg_qp, LassoWorkspace, Sign, SolverPath};
use crate::error::{Error, Result};
use crate::stats::SuffStats;

pub const MAX_ALTERNATIONS: usize = 500;

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RowSolution {
    pub node: usize,
    pub c: Vec<f64>,
    pub alpha: f64,
    /// `LS_i / T + 2ω‖c‖₁ + 2π·a`
    pub objective: f64,
    pub ls: f64,
    /// Joint optimality residual in per-unit-time scale.
    pub kkt_residual: f64,
    pub alternations: usize,
    pub lars_steps: usize,
    pub path: SolverPath,
    /// The alternation stalled and an exact joint solve finished the row.
    pub polished: bool,
    /// Every half-step was non-increasing.
    pub monotone: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RowOptions {
    /// Stop alternating once the largest parameter change is below this.
    pub tol: f64,
    /// Joint optimality tolerance after which no exact polish is needed.
    pub kkt_tol: f64,
    pub alpha_penalty: f64,
}

impl Default for RowOptions {
    fn default() -> Self {
        Self { tol: 1e-8, kkt_tol: 1e-8, alpha_penalty: 0.0 }
    }
}

/// Factorization of Γ shared by all rows at one θ.
pub struct RowSolver<'a> {
    stats: &'a SuffStats,
    ws: Option<LassoWorkspace>,
    opts: RowOptions,
}

impl<'a> RowSolver<'a> {
    pub fn new(stats: &'a SuffStats, opts: RowOptions) -> Result<Self> {
        let n = stats.n();
        let ws = if n == 0 {
            None
        } else {
            Some(LassoWorkspace::new(&stats.gram, &vec![1.0; n], &vec![Sign::NonNegative; n], 0.1 * opts.kkt_tol * stats.window.len())?)
        };
        Ok(Self { stats, ws, opts })
    }

    pub fn solve(&self, i: usize, omega: f64) -> Result<RowSolution> {
        let s = self.stats;
        let n = s.n();
        if i >= n {
            return Err(Error::Dimension(format!("node {i} out of range")));
        }
        if !(omega >= 0.0) || !omega.is_finite() {
            return Err(Error::InvalidInput(format!("omega must be finite and non-negative, got {omega}")));
        }
        let vii = s.v_diag[i];
        if !(vii > 0.0) {
            return Err(Error::Domain(format!("node {i} has zero baseline integral")));
        }
        let t = s.window.len();
        let pi = self.opts.alpha_penalty;
        let gi = DVector::from_iterator(n, (0..n).map(|j| s.g[(i, j)]));
        let ai = DVector::from_iterator(n, (0..n).map(|j| s.a[(i, j)]));
        // joint form over x = (a, c) with linear penalties, all coordinates ≥ 0
        let h = DMatrix::from_fn(n + 1, n + 1, |r, q| match (r, q) {
            (0, 0) => vii,
            (0, q) => gi[q - 1],
            (r, 0) => gi[r - 1],
            (r, q) => s.gram[(r - 1, q - 1)],
        });
        let f = DVector::from_iterator(
            n + 1,
            std::iter::once(s.v[i] - t * pi).chain((0..n).map(|j| ai[j] - t * omega)),
        );
        let objective = |x: &DVector<f64>| ((&h * x).dot(x) - 2.0 * f.dot(x)) / t;
        let joint_kkt = |x: &DVector<f64>| kkt_residual(&h, &f, &vec![0.0; n + 1], &vec![true; n + 1], x, None) / t;

        let mut a = 1.0;
        let mut c = DVector::zeros(n);
        let mut x = stack(a, &c);
        let mut last = objective(&x);
        let mut monotone = true;
        let mut lars_steps = 0;
        let mut path = SolverPath::Lars;
        let mut alternations = 0;
        let slack = |v: f64| 1e-12 * v.abs().max(1.0);
        while alternations < MAX_ALTERNATIONS {
            alternations += 1;
            let b = &ai - &gi * a;
            let c_new = if omega > 0.0 {
                let sol = self.ws.as_ref().expect("workspace for n > 0").solve_scaled(&b, t * omega, Some(&c))?;
                lars_steps += sol.lars_steps;
                if sol.path != SolverPath::Lars {
                    path = sol.path;
                }
                DVector::from_vec(sol.x)
            } else {
                path = SolverPath::ActiveSet;
                nonneg_qp(&s.gram, &b, 1e-3 * self.opts.kkt_tol * t)?
            };
            let half = objective(&stack(a, &c_new));
            monotone &= half <= last + slack(last);
            let a_new = ((s.v[i] - c_new.dot(&gi) - t * pi) / vii).max(0.0);
            x = stack(a_new, &c_new);
            let full = objective(&x);
            monotone &= full <= half + slack(half);
            last = full;
            let change = (a_new - a).abs().max((&c_new - &c).amax());
            a = a_new;
            c = c_new;
            if change < self.opts.tol {
                break;
            }
        }
        let mut polished = false;
        if joint_kkt(&x) > self.opts.kkt_tol {
            let exact = nonneg_qp(&h, &f, 1e-3 * self.opts.kkt_tol * t)?;
            if objective(&exact) <= objective(&x) + slack(objective(&x)) {
                x = exact;
                polished = true;
            }
        }
        let kkt = joint_kkt(&x);
        let a = x[0];
        let c: Vec<f64> = x.iter().skip(1).copied().collect();
        let ls = crate::stats::ls_value(s, &c, a, i)?;
        let l1: f64 = c.iter().sum();
        Ok(RowSolution {
            node: i,
            c,
            alpha: a,
            objective: ls / t + 2.0 * omega * l1 + 2.0 * pi * a,
            ls,
            kkt_residual: kkt,
            alternations,
            lars_steps,
            path,
            polished,
            monotone,
        })
    }
}

fn stack(a: f64, c: &DVector<f64>) -> DVector<f64> {
    DVector::from_iterator(c.len() + 1, std::iter::once(a).chain(c.iter().copied()))
}

pub fn solve_row_problem(stats: &SuffStats, i: usize, omega: f64, opts: RowOptions) -> Result<RowSolution> {
    RowSolver::new(stats, opts)?.solve(i, omega)
}

/// All rows at once; any scheduling order gives the same results.
pub fn solve_all_rows(stats: &SuffStats, omega: &[f64], opts: RowOptions) -> Result<Vec<RowSolution>> {
    crate::error::dim_check("omega length", stats.n(), omega.len())?;
    let solver = RowSolver::new(stats, opts)?;
    (0..stats.n()).into_par_iter().map(|i| solver.solve(i, omega[i])).collect()
}
