use rayon::prelude::*;
use serde::Serialize;

use crate::lasso::{path_cov, penalty_grid, CovSystem, LassoOptions, PathOptions};
use crate::numkit::{center, Matrix, SeededRng};
use crate::sir::{make_slices, kernel, pseudo_responses, DEFAULT_SLICES};

use super::{stage_one, StageOneTuning, TwoStageError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum StabilityEstimator {
    /// Lasso SIR of `y` on `X`.
    OneStage,
    /// Lasso SIR of `y` on `X̂`.
    TwoStage,
    /// Lasso of `y` on `X̂`.
    TwoStageLinear,
}

impl std::str::FromStr for StabilityEstimator {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "one-stage" | "lsir" => Ok(Self::OneStage),
            "two-stage" | "2slsir" => Ok(Self::TwoStage),
            "two-stage-linear" | "2slasso" => Ok(Self::TwoStageLinear),
            other => Err(format!(
                "unknown estimator `{other}` (expected one-stage, two-stage or two-stage-linear)"
            )),
        }
    }
}

#[derive(Debug, Clone)]
pub struct StabilityOptions {
    pub subsamples: usize,
    /// Probability cutoff entering the error-rate bound.
    pub cutoff: f64,
    /// Reported variables reach this maximum probability.
    pub threshold: f64,
    /// Per-family error rate bound; `None` disables the model-size cap.
    pub pfer: Option<f64>,
    pub slices: usize,
    pub d: usize,
    pub stage_one: StageOneTuning,
    pub n_grid: usize,
    pub min_ratio: f64,
    pub lasso: LassoOptions,
}

impl Default for StabilityOptions {
    fn default() -> Self {
        Self {
            subsamples: 100,
            cutoff: 0.75,
            threshold: 0.5,
            pfer: Some(1.0),
            slices: DEFAULT_SLICES,
            d: 1,
            stage_one: StageOneTuning::Bic,
            n_grid: 100,
            min_ratio: 1e-3,
            lasso: LassoOptions::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StabilityPath {
    pub estimator: StabilityEstimator,
    /// Stage-two penalties, descending.
    pub grid: Vec<f64>,
    /// `probability[j][g]`: share of successful subsamples with variable
    /// `j` active at grid point `g`.
    pub probability: Vec<Vec<f64>>,
    pub subsamples: usize,
    pub subsample_size: usize,
    pub failures: usize,
    pub cutoff: f64,
    pub threshold: f64,
    /// Average active-set size per grid point.
    pub mean_model_size: Vec<f64>,
    /// Model-size cap `√((2·cutoff − 1)·p·PFER)`, if enabled.
    pub max_model_size: Option<f64>,
    /// Grid points whose average model size respects the cap.
    pub admissible: Vec<bool>,
    /// Maximum probability over admissible grid points.
    pub max_probability: Vec<f64>,
    pub selected: Vec<usize>,
}

/// Regressors and responses for one data set (full or subsample).
fn prepare(
    y: &[f64],
    x: &Matrix,
    z: &Matrix,
    estimator: StabilityEstimator,
    opts: &StabilityOptions,
) -> Result<(Matrix, Vec<Vec<f64>>), TwoStageError> {
    let design = match estimator {
        StabilityEstimator::OneStage => x.centered(),
        _ => stage_one(x, z, &opts.stage_one, &opts.lasso)?.fitted,
    };
    let responses = match estimator {
        StabilityEstimator::TwoStageLinear => {
            let mut yc = y.to_vec();
            center(&mut yc);
            vec![yc]
        }
        _ => {
            let slices = make_slices(y, opts.slices)?;
            let k = kernel(&design, &slices)?;
            pseudo_responses(&k, opts.d)?.into_iter().map(|p| p.values).collect()
        }
    };
    Ok((design, responses))
}

fn active_matrix(
    design: &Matrix,
    responses: &[Vec<f64>],
    grid: &[f64],
    opts: &LassoOptions,
) -> Result<Vec<Vec<bool>>, TwoStageError> {
    let n = design.rows();
    let mut gram = design.gram();
    gram.scale_in_place(1.0 / n as f64);
    let p = design.cols();
    let mut active = vec![vec![false; grid.len()]; p];
    let path_opts = PathOptions::default();
    for r in responses {
        let sys = CovSystem::with_gram(&gram, design, r);
        let fits = path_cov(&sys, grid, opts, &path_opts)?;
        for (g, fit) in fits.iter().enumerate() {
            for j in fit.active_set() {
                active[j][g] = true;
            }
        }
    }
    Ok(active)
}

/// Selection probabilities over half-sample refits along a common
/// stage-two penalty grid computed from the full data.
pub fn stability_selection(
    y: &[f64],
    x: &Matrix,
    z: &Matrix,
    estimator: StabilityEstimator,
    opts: &StabilityOptions,
    rng: &SeededRng,
) -> Result<StabilityPath, TwoStageError> {
    let n = y.len();
    if x.rows() != n || z.rows() != n {
        return Err(TwoStageError::DimensionMismatch(format!(
            "y has {n} entries, x has {} rows, z has {} rows",
            x.rows(),
            z.rows()
        )));
    }
    if n < 20 {
        return Err(TwoStageError::TooFewObservations { n, needed: 20 });
    }
    let p = x.cols();
    let (design, responses) = prepare(y, x, z, estimator, opts)?;
    let nf = n as f64;
    let mu_max = responses
        .iter()
        .map(|r| {
            design
                .tr_mul_vec(r)
                .iter()
                .fold(0.0_f64, |m, v| m.max(v.abs() / nf))
        })
        .fold(0.0_f64, f64::max);
    let grid = penalty_grid(mu_max, opts.n_grid, opts.min_ratio);
    let half = n / 2;

    let outcomes: Vec<Option<Vec<Vec<bool>>>> = (0..opts.subsamples)
        .into_par_iter()
        .map(|b| {
            let mut r = rng.child(b as u64);
            let idx = r.sample_without_replacement(n, half);
            let yb: Vec<f64> = idx.iter().map(|&i| y[i]).collect();
            let xb = x.select_rows(&idx);
            let zb = z.select_rows(&idx);
            prepare(&yb, &xb, &zb, estimator, opts)
                .and_then(|(d, rs)| active_matrix(&d, &rs, &grid, &opts.lasso))
                .ok()
        })
        .collect();

    let successes: Vec<&Vec<Vec<bool>>> = outcomes.iter().flatten().collect();
    let failures = outcomes.len() - successes.len();
    if failures > 0 {
        log::warn!("{failures} of {} subsample fits failed and were dropped", opts.subsamples);
    }
    if successes.is_empty() {
        return Err(TwoStageError::AllSubsamplesFailed);
    }
    let m = successes.len() as f64;
    let g_len = grid.len();
    let mut probability = vec![vec![0.0; g_len]; p];
    for act in &successes {
        for j in 0..p {
            for g in 0..g_len {
                if act[j][g] {
                    probability[j][g] += 1.0;
                }
            }
        }
    }
    probability.iter_mut().flatten().for_each(|v| *v /= m);
    let mean_model_size: Vec<f64> = (0..g_len)
        .map(|g| (0..p).map(|j| probability[j][g]).sum())
        .collect();
    let max_model_size = opts
        .pfer
        .map(|pfer| ((2.0 * opts.cutoff - 1.0).max(0.0) * p as f64 * pfer).sqrt());
    let admissible: Vec<bool> = mean_model_size
        .iter()
        .map(|s| max_model_size.is_none_or(|cap| *s <= cap))
        .collect();
    let max_probability: Vec<f64> = probability
        .iter()
        .map(|row| {
            row.iter()
                .zip(&admissible)
                .filter(|(_, a)| **a)
                .fold(0.0_f64, |m, (v, _)| m.max(*v))
        })
        .collect();
    let selected = (0..p)
        .filter(|&j| max_probability[j] >= opts.threshold)
        .collect();
    Ok(StabilityPath {
        estimator,
        grid,
        probability,
        subsamples: opts.subsamples,
        subsample_size: half,
        failures,
        cutoff: opts.cutoff,
        threshold: opts.threshold,
        mean_model_size,
        max_model_size,
        admissible,
        max_probability,
        selected,
    })
}
