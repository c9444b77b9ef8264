use std::time::Instant;

use rayon::prelude::*;
use serde::Serialize;

use crate::lasso::{CvRule, LassoOptions};
use crate::numkit::{Matrix, SeededRng};
use crate::sir::{lasso_sir, SirOptions, SirTuning, DEFAULT_SLICES};
use crate::twostage::{stage_one, stage_two_sir, tuned_lasso, StageOneFit, StageOneTuning};

use super::{
    projection_error, replicate, selection_auc_with, AucOrientation, Dataset, SimError,
    SimulationConfig,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum Estimator {
    #[serde(rename = "lasso")]
    Lasso,
    #[serde(rename = "lsir")]
    Lsir,
    #[serde(rename = "2slasso")]
    TwoStageLasso,
    #[serde(rename = "2slsir")]
    TwoStageLsir,
}

impl Estimator {
    pub const ALL: [Estimator; 4] = [Self::Lasso, Self::Lsir, Self::TwoStageLasso, Self::TwoStageLsir];

    pub fn label(self) -> &'static str {
        match self {
            Self::Lasso => "lasso",
            Self::Lsir => "lsir",
            Self::TwoStageLasso => "2slasso",
            Self::TwoStageLsir => "2slsir",
        }
    }

    fn stream(self) -> u64 {
        match self {
            Self::Lasso => 2,
            Self::Lsir => 3,
            Self::TwoStageLasso => 4,
            Self::TwoStageLsir => 5,
        }
    }

    fn uses_stage_one(self) -> bool {
        matches!(self, Self::TwoStageLasso | Self::TwoStageLsir)
    }
}

impl std::fmt::Display for Estimator {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.label())
    }
}

impl std::str::FromStr for Estimator {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "lasso" => Ok(Self::Lasso),
            "lsir" => Ok(Self::Lsir),
            "2slasso" => Ok(Self::TwoStageLasso),
            "2slsir" => Ok(Self::TwoStageLsir),
            other => Err(format!(
                "unknown estimator `{other}` (expected lasso, lsir, 2slasso or 2slsir)"
            )),
        }
    }
}

#[derive(Debug, Clone)]
pub struct ExperimentOptions {
    pub stage_one: StageOneTuning,
    pub cv_folds: usize,
    /// CV rule for the linear comparators.
    pub lasso_rule: CvRule,
    /// CV rule for the SIR estimators.
    pub sir_rule: CvRule,
    pub slices: usize,
    pub auc: AucOrientation,
    pub lasso: LassoOptions,
}

impl Default for ExperimentOptions {
    fn default() -> Self {
        Self {
            stage_one: StageOneTuning::Bic,
            cv_folds: 10,
            lasso_rule: CvRule::Min,
            sir_rule: CvRule::OneSe,
            slices: DEFAULT_SLICES,
            auc: AucOrientation::Fixed,
            lasso: LassoOptions::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReplicateRecord {
    pub estimator: Estimator,
    pub replicate: u64,
    pub error: Option<f64>,
    pub auc: Option<f64>,
    pub support_size: Option<usize>,
    pub runtime: f64,
    pub failure: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Summary {
    pub estimator: Estimator,
    pub model: super::OutcomeModel,
    pub n: usize,
    pub p: usize,
    pub q: usize,
    pub z_kind: super::InstrumentKind,
    pub replicates: usize,
    pub mean_error: f64,
    pub sd_error: f64,
    pub mean_auc: f64,
    pub sd_auc: f64,
    pub failures: usize,
}

#[derive(Debug, Clone)]
pub struct ExperimentResult {
    pub summaries: Vec<Summary>,
    pub records: Vec<ReplicateRecord>,
}

/// Mean and sample standard deviation (`NaN` when undefined).
pub fn mean_sd(values: &[f64]) -> (f64, f64) {
    let n = values.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let m = values.iter().sum::<f64>() / n as f64;
    if n == 1 {
        return (m, f64::NAN);
    }
    let v = values.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1) as f64;
    (m, v.sqrt())
}

/// Direction estimate of one estimator on one data set.
pub fn fit_estimator(
    estimator: Estimator,
    data: &Dataset,
    d: usize,
    stage: Option<&StageOneFit>,
    opts: &ExperimentOptions,
    seed: u64,
) -> Result<Matrix, SimError> {
    let cv = |rule| SirTuning::Cv {
        folds: opts.cv_folds,
        repeats: 1,
        seed,
        rule,
    };
    let sir_opts = SirOptions {
        slices: opts.slices,
        d,
        tuning: cv(opts.sir_rule),
        lasso: opts.lasso.clone(),
    };
    let owned;
    let stage = match (estimator.uses_stage_one(), stage) {
        (true, Some(s)) => Some(s),
        (true, None) => {
            owned = stage_one(&data.x, &data.z, &opts.stage_one, &opts.lasso)?;
            Some(&owned)
        }
        _ => None,
    };
    Ok(match estimator {
        Estimator::Lasso => {
            let fit = tuned_lasso(&data.y, &data.x, &cv(opts.lasso_rule), &opts.lasso)?;
            Matrix::column_vector(&fit.fit.coefficients)
        }
        Estimator::Lsir => lasso_sir(&data.y, &data.x, &sir_opts)?.b_hat,
        Estimator::TwoStageLasso => {
            let s = stage.expect("stage one present");
            let fit = tuned_lasso(&data.y, &s.fitted, &cv(opts.lasso_rule), &opts.lasso)?;
            Matrix::column_vector(&fit.fit.coefficients)
        }
        Estimator::TwoStageLsir => {
            let s = stage.expect("stage one present");
            stage_two_sir(&data.y, &s.fitted, &sir_opts)?.b_hat
        }
    })
}

fn run_replicate(
    config: &SimulationConfig,
    estimators: &[Estimator],
    index: u64,
    opts: &ExperimentOptions,
) -> Vec<ReplicateRecord> {
    let failed = |e: Estimator, msg: String| ReplicateRecord {
        estimator: e,
        replicate: index,
        error: None,
        auc: None,
        support_size: None,
        runtime: 0.0,
        failure: Some(msg),
    };
    let data = match replicate(config, index) {
        Ok(d) => d,
        Err(e) => return estimators.iter().map(|&est| failed(est, e.to_string())).collect(),
    };
    let truth = data.truth.as_ref().expect("simulated data carry their truth");
    let d = config.model.dimension();
    let streams = SeededRng::new(config.seed).child(index);

    let mut stage_time = 0.0;
    let stage = if estimators.iter().any(|e| e.uses_stage_one()) {
        let t = Instant::now();
        let s = stage_one(&data.x, &data.z, &opts.stage_one, &opts.lasso);
        stage_time = t.elapsed().as_secs_f64();
        Some(s.map_err(SimError::from))
    } else {
        None
    };

    estimators
        .iter()
        .map(|&est| {
            let t = Instant::now();
            let seed = streams.child(est.stream()).seed();
            let stage_fit = match (&stage, est.uses_stage_one()) {
                (Some(Ok(s)), true) => Some(s),
                (Some(Err(e)), true) => return failed(est, e.to_string()),
                _ => None,
            };
            let result = fit_estimator(est, &data, d, stage_fit, opts, seed).and_then(|b| {
                let err = projection_error(&b, &truth.b)?;
                let auc = selection_auc_with(&b, &truth.support, opts.auc)?;
                let size = crate::sir::support_of(&b).len();
                Ok((err, auc, size))
            });
            let mut runtime = t.elapsed().as_secs_f64();
            if est.uses_stage_one() {
                runtime += stage_time;
            }
            match result {
                Ok((err, auc, size)) => ReplicateRecord {
                    estimator: est,
                    replicate: index,
                    error: Some(err),
                    auc: Some(auc),
                    support_size: Some(size),
                    runtime,
                    failure: None,
                },
                Err(e) => failed(est, e.to_string()),
            }
        })
        .collect()
}

/// Replicated experiment; replicate `i` uses child stream `i` of the
/// configuration seed, so results do not depend on scheduling.
pub fn run_experiment(
    config: &SimulationConfig,
    estimators: &[Estimator],
    replicates: usize,
    opts: &ExperimentOptions,
) -> Result<ExperimentResult, SimError> {
    config.validate()?;
    if replicates == 0 {
        return Err(SimError::InvalidConfig("replicates must be at least 1".into()));
    }
    let per_rep: Vec<Vec<ReplicateRecord>> = (0..replicates as u64)
        .into_par_iter()
        .map(|i| run_replicate(config, estimators, i, opts))
        .collect();
    let records: Vec<ReplicateRecord> = per_rep.into_iter().flatten().collect();
    let summaries = estimators
        .iter()
        .map(|&est| {
            let mine: Vec<&ReplicateRecord> = records.iter().filter(|r| r.estimator == est).collect();
            let errors: Vec<f64> = mine.iter().filter_map(|r| r.error).collect();
            let aucs: Vec<f64> = mine.iter().filter_map(|r| r.auc).collect();
            let (mean_error, sd_error) = mean_sd(&errors);
            let (mean_auc, sd_auc) = mean_sd(&aucs);
            Summary {
                estimator: est,
                model: config.model,
                n: config.n,
                p: config.p,
                q: config.q,
                z_kind: config.z_kind,
                replicates,
                mean_error,
                sd_error,
                mean_auc,
                sd_auc,
                failures: mine.iter().filter(|r| r.failure.is_some()).count(),
            }
        })
        .collect();
    Ok(ExperimentResult { summaries, records })
}
