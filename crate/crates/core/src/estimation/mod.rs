//! Three-stage estimation: joint penalized fit, de-biasing of θ and a refit
//! of the network at the corrected θ, with penalty tuning and diagnostics.

pub mod cv;
pub mod debias;
pub mod derivatives;
pub mod diagnostics;
pub mod fit;
pub mod optimize;
pub mod stage1;
pub mod tuning;

pub use cv::{cross_validate, CvOptions, CvResult, CvRound};
pub use debias::{debias_theta, fitted_params, stage2_debias, stage3_fit, DebiasResult, DebiasRow, SigmaRule, Stage3Result};
pub use derivatives::{compute_score, compute_score_and_sigma, compute_sigma, derivatives_from_stats, flatten, Layout, SIGMA_NODE_CAP};
pub use diagnostics::{compatibility_diagnostic, residual_check};
pub use fit::{fit, fit_with_omega, select_omega, Diagnostics, FitConfig, FitReport, OmegaSource, Stages};
pub use optimize::{nelder_mead_box, SimplexResult};
pub use stage1::{profile_at, profile_criterion, stage1_fit, stage1_fit_from, FitData, Profile, RestartTrace, Stage1Options, Stage1Result, ThetaBox};
pub use tuning::{phi, theory_tuning, OmegaRule, TuningConstants, TuningValues};
