//! ℓ1-penalised least squares: solver, paths and penalty selection.

mod path;
mod problem;
mod solver;
mod tune;

pub use path::{grid_for, path, path_cov, penalty_grid, PathOptions};
pub use problem::{solve, LassoProblem, CENTERING_TOL};
pub use solver::{solve_cov, soft_threshold, CovSystem, LassoFit, LassoOptions, KKT_TOL};
pub use tune::{
    bic_select, bic_value, cv_from_full, cv_select, random_folds, tune_bic, tune_cv, CvPlan, CvRule, TuningMethod,
    TuningReport,
};

use thiserror::Error;

#[derive(Debug, Clone, Error)]
pub enum LassoError {
    #[error("non-finite value in lasso problem or iterate")]
    NonFinite,
    #[error("coordinate descent hit the sweep limit after {} sweeps", fit.iterations)]
    MaxIterations { fit: Box<LassoFit> },
    #[error("penalty must be finite and non-negative, got {0}")]
    InvalidPenalty(f64),
    #[error("{what} is not centered (mean {mean:e})")]
    NotCentered { what: String, mean: f64 },
    #[error("dimension mismatch: {detail}")]
    DimensionMismatch { detail: String },
    #[error("cannot split {n} observations into {folds} non-empty folds")]
    DegenerateFolds { n: usize, folds: usize },
    #[error("invalid grid or fold specification: {0}")]
    InvalidGrid(String),
}
