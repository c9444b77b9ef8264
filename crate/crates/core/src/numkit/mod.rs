//! Dense linear algebra, seeded randomness and rank statistics.

mod eigen;
mod factor;
mod matrix;
mod rank;
mod rng;

pub use eigen::{
    max_orthogonality_defect, max_relative_residual, normalize_and_sign, sym_eigen, SymEigen,
    ORTHOGONALITY_TOL, RESIDUAL_TOL, SYMMETRY_TOL,
};
pub use factor::{
    cholesky, cholesky_solve, gram_schmidt, projection_matrix, solve_spd, RANK_TOL,
};
pub use matrix::{axpy, center, dot, mean, norm2, Matrix};
pub use rank::{mann_whitney_auc, median, mid_ranks};
pub use rng::{child_seed, splitmix64, SeededRng};

use thiserror::Error;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum NumError {
    #[error("matrix is not symmetric (max |a_ij - a_ji| = {max_abs_diff:e})")]
    NonSymmetric { max_abs_diff: f64 },
    #[error("non-finite value encountered")]
    NonFinite,
    #[error("matrix is not positive definite (pivot {pivot} is not positive)")]
    NotPositiveDefinite { pivot: usize },
    #[error("column {column} is linearly dependent on the preceding columns")]
    RankDeficient { column: usize },
    #[error("labels must contain both classes")]
    DegenerateLabels,
    #[error("dimension mismatch: {expected}")]
    DimensionMismatch { expected: String },
    #[error("{0} did not converge")]
    NoConvergence(&'static str),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}
