use serde::Serialize;

use crate::lasso::{cv_from_full, grid_for, path_cov, CovSystem, CvPlan, CvRule, LassoFit, LassoOptions, PathOptions};
use crate::numkit::{norm2, Matrix, SeededRng};
use crate::sir::{pseudo_response, SirError, SirFitter, DEFAULT_SLICES};

use super::TwoStageError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum RegressorChoice {
    Z,
    X,
    Xhat,
}

impl std::str::FromStr for RegressorChoice {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "z" => Ok(Self::Z),
            "x" => Ok(Self::X),
            "xhat" => Ok(Self::Xhat),
            other => Err(format!("unknown regressor `{other}` (expected Z, X or Xhat)")),
        }
    }
}

impl std::fmt::Display for RegressorChoice {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::Z => "Z",
            Self::X => "X",
            Self::Xhat => "Xhat",
        })
    }
}

#[derive(Debug, Clone)]
pub struct DimensionOptions {
    pub slices: usize,
    pub repeats: usize,
    pub folds: usize,
    pub rule: CvRule,
    pub lasso: LassoOptions,
}

impl Default for DimensionOptions {
    fn default() -> Self {
        Self {
            slices: DEFAULT_SLICES,
            repeats: 50,
            folds: 5,
            rule: CvRule::OneSe,
            lasso: LassoOptions::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DimensionVote {
    pub regressor: RegressorChoice,
    /// `d̂` of each repeat.
    pub votes: Vec<usize>,
    /// Repeats whose adjusted eigenvalues were all equal.
    pub degenerate: Vec<bool>,
    /// Adjusted eigenvalues per repeat, directions `1..H-1`.
    pub adjusted: Vec<Vec<f64>>,
    /// Most frequent vote, ties to the smaller value.
    pub d_hat: usize,
}

/// One-dimensional 2-means with centers started at the minimum and the
/// maximum. Returns the size of the cluster holding the maximum, and
/// whether all values coincide (then every value counts).
pub fn two_means(values: &[f64]) -> (usize, bool) {
    let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if values.is_empty() || !(hi > lo) {
        return (values.len(), true);
    }
    let (mut c0, mut c1) = (lo, hi);
    let mut upper: Vec<bool> = vec![false; values.len()];
    for _ in 0..1000 {
        let next: Vec<bool> = values.iter().map(|&v| (v - c1).abs() < (v - c0).abs()).collect();
        let changed = next != upper;
        upper = next;
        let (mut s0, mut n0, mut s1, mut n1) = (0.0, 0usize, 0.0, 0usize);
        for (&v, &u) in values.iter().zip(&upper) {
            if u {
                s1 += v;
                n1 += 1;
            } else {
                s0 += v;
                n0 += 1;
            }
        }
        if n0 > 0 {
            c0 = s0 / n0 as f64;
        }
        if n1 > 0 {
            c1 = s1 / n1 as f64;
        }
        if !changed {
            break;
        }
    }
    (upper.iter().filter(|u| **u).count(), false)
}

fn mode_smallest(votes: &[usize]) -> usize {
    let max = votes.iter().copied().max().unwrap_or(0);
    let mut counts = vec![0usize; max + 1];
    for &v in votes {
        counts[v] += 1;
    }
    let mut best = 0;
    for (v, &c) in counts.iter().enumerate() {
        if c > counts[best] {
            best = v;
        }
    }
    best
}

/// Structural dimension by clustering adjusted eigenvalues over repeated
/// K-fold CV splits.
pub fn select_dimension(
    y: &[f64],
    regressors: &Matrix,
    regressor: RegressorChoice,
    opts: &DimensionOptions,
    rng: &mut SeededRng,
) -> Result<DimensionVote, TwoStageError> {
    let xc = regressors.centered();
    let fitter = SirFitter::new(y, &xc, opts.slices)?;
    let n = xc.rows();
    let dirs = (opts.slices - 1).min(fitter.kernel.eigen.len());
    let path_opts = PathOptions::for_tuning(n);

    // Pseudo-responses and full-data paths do not depend on the split.
    struct Direction {
        eigenvalue: f64,
        response: Vec<f64>,
        grid: Vec<f64>,
        full: Vec<LassoFit>,
    }
    let mut directions: Vec<Option<Direction>> = Vec::with_capacity(dirs);
    for k in 1..=dirs {
        match pseudo_response(&fitter.kernel, k) {
            Ok(pr) => {
                let sys = CovSystem::with_gram(&fitter.gram, &xc, &pr.values);
                let grid = grid_for(&sys, None, &path_opts);
                let full = path_cov(&sys, &grid, &opts.lasso, &path_opts)?;
                directions.push(Some(Direction {
                    eigenvalue: pr.eigenvalue,
                    response: pr.values,
                    grid,
                    full,
                }));
            }
            Err(SirError::EigenvalueTooSmall { .. }) => directions.push(None),
            Err(e) => return Err(e.into()),
        }
    }

    let mut votes = Vec::with_capacity(opts.repeats);
    let mut degenerate = Vec::with_capacity(opts.repeats);
    let mut adjusted_all = Vec::with_capacity(opts.repeats);
    for _ in 0..opts.repeats {
        let plan = [CvPlan::random(&xc, opts.folds, rng)?];
        let mut adjusted = Vec::with_capacity(dirs);
        for d in &directions {
            let value = match d {
                Some(d) => {
                    let rep = cv_from_full(
                        &xc,
                        &d.grid,
                        &d.full,
                        &plan,
                        &d.response,
                        opts.rule,
                        &opts.lasso,
                        &path_opts,
                    )?;
                    d.eigenvalue * norm2(&rep.fit.coefficients)
                }
                None => 0.0,
            };
            adjusted.push(value);
        }
        let (d_hat, flat) = two_means(&adjusted);
        votes.push(d_hat);
        degenerate.push(flat);
        adjusted_all.push(adjusted);
    }
    let d_hat = mode_smallest(&votes);
    Ok(DimensionVote {
        regressor,
        votes,
        degenerate,
        adjusted: adjusted_all,
        d_hat,
    })
}
