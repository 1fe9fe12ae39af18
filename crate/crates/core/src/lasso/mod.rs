//! Lasso solvers: LARS on a centred least-squares reformulation, projected
//! coordinate descent, and the problem shapes used by the estimator.

mod cd;
mod kkt;
mod lars;
mod nodewise;
mod problem;
mod row;
mod xtilde;

pub use cd::{coordinate_descent, MAX_SWEEPS};
pub use kkt::kkt_residual;
pub use lars::{lars_gram, LarsOutput};
pub use nodewise::{nodewise_batch, nodewise_lasso, NodewiseResult};
pub use problem::{
    lars_lasso, nonneg_qp, solve_quadratic_lasso, LassoSolution, LassoWorkspace, QuadraticLassoProblem, Sign,
    SolverPath, DEFAULT_RANK_TOL, DEFAULT_TOL,
};
pub use row::{solve_all_rows, solve_row_problem, RowOptions, RowSolution, RowSolver, MAX_ALTERNATIONS};
pub use xtilde::{build_xtilde, center_transform};
