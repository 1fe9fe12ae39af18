//! Simulation and penalized least-squares estimation of sparse multivariate
//! Hawkes processes whose baselines are driven by common covariates.

pub mod error;
pub mod estimation;
pub mod experiments;
pub mod io;
pub mod lasso;
pub mod manifest;
pub mod model;
pub(crate) mod serde_matrix;
pub mod simulate;
pub mod stats;

pub use error::{Error, Result};
pub use model::*;
