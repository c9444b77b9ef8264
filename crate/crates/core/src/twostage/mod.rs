//! Two-stage estimators: sparse instrument regressions followed by lasso
//! SIR (or a plain lasso) on the fitted covariates, plus structural
//! dimension selection and stability selection.

mod dimension;
mod stability;
mod stage_one;

pub use dimension::{two_means, DimensionOptions, DimensionVote, RegressorChoice, select_dimension};
pub use stability::{stability_selection, StabilityEstimator, StabilityOptions, StabilityPath};
pub use stage_one::{ridge_pilot_scales, stage_one, ColumnDiagnostics, StageOneFit, StageOneTuning};

use thiserror::Error;

use crate::lasso::{
    bic_select, cv_select, solve_cov, CovSystem, CvPlan, LassoError, LassoFit, LassoOptions,
    PathOptions, TuningReport,
};
use crate::numkit::{Matrix, NumError, SeededRng};
use crate::sir::{SdrEstimate, SirError, SirFitter, SirOptions, SirTuning, Stage};

/// Penalty rule for the second stage; shares the shape of the SIR rule.
pub type StageTwoTuning = SirTuning;

#[derive(Debug, Clone, Error)]
pub enum TwoStageError {
    #[error("stage one, column {column}: {source}")]
    StageOne {
        column: usize,
        #[source]
        source: LassoError,
    },
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("fixed penalties: expected 1 or {expected} values, got {got}")]
    PenaltyCount { expected: usize, got: usize },
    #[error("need at least {needed} observations, got {n}")]
    TooFewObservations { n: usize, needed: usize },
    #[error("every subsample fit failed")]
    AllSubsamplesFailed,
    #[error(transparent)]
    Sir(#[from] SirError),
    #[error(transparent)]
    Lasso(#[from] LassoError),
    #[error(transparent)]
    Num(#[from] NumError),
}

#[derive(Debug, Clone, Default)]
pub struct TwoStageOptions {
    pub stage_one: StageOneTuning,
    pub sir: SirOptions,
}

#[derive(Debug, Clone)]
pub struct TwoStageFit {
    pub estimate: SdrEstimate,
    pub stage_one: StageOneFit,
}

fn check_rows(y: &[f64], x: &Matrix, z: &Matrix) -> Result<(), TwoStageError> {
    if y.len() != x.rows() || x.rows() != z.rows() {
        return Err(TwoStageError::DimensionMismatch(format!(
            "y has {} entries, x has {} rows, z has {} rows",
            y.len(),
            x.rows(),
            z.rows()
        )));
    }
    Ok(())
}

/// Lasso SIR of `y` on the stage-one fitted values `X̂ = ZΓ̂`.
pub fn two_stage_lasso_sir(
    y: &[f64],
    x: &Matrix,
    z: &Matrix,
    opts: &TwoStageOptions,
) -> Result<TwoStageFit, TwoStageError> {
    check_rows(y, x, z)?;
    let s1 = stage_one(x, z, &opts.stage_one, &opts.sir.lasso)?;
    let estimate = stage_two_sir(y, &s1.fitted, &opts.sir)?;
    Ok(TwoStageFit {
        estimate,
        stage_one: s1,
    })
}

/// Lasso SIR on an already computed `X̂` (centered).
pub fn stage_two_sir(y: &[f64], xhat: &Matrix, opts: &SirOptions) -> Result<SdrEstimate, TwoStageError> {
    let fitter = SirFitter::new(y, xhat, opts.slices)?;
    Ok(fitter.estimate(opts.d, &opts.tuning, &opts.lasso, Stage::TwoStage)?)
}

#[derive(Debug, Clone)]
pub struct LinearFit {
    pub fit: LassoFit,
    pub tuning: Option<TuningReport>,
}

/// Plain lasso of centered `y` on a centered design with the given rule.
pub fn tuned_lasso(
    y: &[f64],
    design: &Matrix,
    tuning: &StageTwoTuning,
    opts: &LassoOptions,
) -> Result<LinearFit, TwoStageError> {
    if y.len() != design.rows() {
        return Err(TwoStageError::DimensionMismatch(format!(
            "y has {} entries, design has {} rows",
            y.len(),
            design.rows()
        )));
    }
    let n = design.rows();
    let mut yc = y.to_vec();
    crate::numkit::center(&mut yc);
    let mut gram = design.gram();
    gram.scale_in_place(1.0 / n as f64);
    let path_opts = PathOptions::for_tuning(n);
    match tuning {
        SirTuning::Fixed(v) => {
            if v.len() != 1 {
                return Err(TwoStageError::PenaltyCount {
                    expected: 1,
                    got: v.len(),
                });
            }
            let sys = CovSystem::with_gram(&gram, design, &yc);
            Ok(LinearFit {
                fit: solve_cov(&sys, v[0], None, opts)?,
                tuning: None,
            })
        }
        SirTuning::Bic => {
            let sys = CovSystem::with_gram(&gram, design, &yc);
            let rep = bic_select(&sys, None, opts, &path_opts)?;
            Ok(LinearFit {
                fit: rep.fit.clone(),
                tuning: Some(rep),
            })
        }
        SirTuning::Cv {
            folds,
            repeats,
            seed,
            rule,
        } => {
            let mut rng = SeededRng::new(*seed);
            let plans = (0..(*repeats).max(1))
                .map(|_| CvPlan::random(design, *folds, &mut rng))
                .collect::<Result<Vec<_>, _>>()?;
            let rep = cv_select(design, &gram, &plans, &yc, None, *rule, opts, &path_opts)?;
            Ok(LinearFit {
                fit: rep.fit.clone(),
                tuning: Some(rep),
            })
        }
    }
}

#[derive(Debug, Clone)]
pub struct TwoStageLassoFit {
    pub linear: LinearFit,
    pub stage_one: StageOneFit,
}

/// Stage one as above, then a single lasso of `y` on `X̂`.
pub fn two_stage_lasso(
    y: &[f64],
    x: &Matrix,
    z: &Matrix,
    stage_one_tuning: &StageOneTuning,
    stage_two_tuning: &StageTwoTuning,
    opts: &LassoOptions,
) -> Result<TwoStageLassoFit, TwoStageError> {
    check_rows(y, x, z)?;
    let s1 = stage_one(x, z, stage_one_tuning, opts)?;
    let linear = tuned_lasso(y, &s1.fitted, stage_two_tuning, opts)?;
    Ok(TwoStageLassoFit {
        linear,
        stage_one: s1,
    })
}
