//! Simulation designs, evaluation metrics and replicated experiments.

pub mod appendix;
mod design;
mod experiment;
mod metrics;

pub use design::{
    generate, make_truth, outcome, replicate, Dataset, GroundTruth, InstrumentKind, OutcomeModel,
    SimulationConfig, DENOMINATOR_GUARD, PD_RETRIES,
};
pub use experiment::{
    fit_estimator, mean_sd, run_experiment, Estimator, ExperimentOptions, ExperimentResult,
    ReplicateRecord, Summary,
};
pub use metrics::{
    projection_error, row_scores, selection_auc, selection_auc_with, AucOrientation, MetricsReport,
};

use thiserror::Error;

use crate::lasso::LassoError;
use crate::numkit::NumError;
use crate::sir::SirError;
use crate::twostage::TwoStageError;

#[derive(Debug, Clone, Error)]
pub enum SimError {
    #[error("invalid simulation configuration: {0}")]
    InvalidConfig(String),
    #[error("noise covariance not positive definite after {attempts} draws")]
    CannotAchievePD { attempts: usize },
    #[error("non-finite response generated")]
    NonFinite,
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error(transparent)]
    Num(#[from] NumError),
    #[error(transparent)]
    Lasso(#[from] LassoError),
    #[error(transparent)]
    Sir(#[from] SirError),
    #[error(transparent)]
    TwoStage(#[from] TwoStageError),
}
