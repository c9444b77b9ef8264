use serde::Serialize;

use crate::lasso::{
    bic_select, cv_select, solve_cov, CovSystem, CvPlan, CvRule, LassoOptions, PathOptions,
};
use crate::numkit::{dot, sym_eigen, Matrix, SeededRng};

use super::TwoStageError;

/// Penalty rule for the instrument regressions `x_j ~ Z`.
#[derive(Debug, Clone, PartialEq)]
pub enum StageOneTuning {
    Bic,
    Cv { folds: usize, seed: u64 },
    /// `μ_j = c0 · σ̂_j · √(log(pq)/n)`, `σ̂_j` from a ridge pilot.
    TheoryRate { c0: f64 },
    /// One penalty for all columns or one per column.
    Fixed(Vec<f64>),
}

impl Default for StageOneTuning {
    fn default() -> Self {
        StageOneTuning::Bic
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ColumnDiagnostics {
    pub support_size: usize,
    pub iterations: usize,
    pub kkt_residual: f64,
}

#[derive(Debug, Clone)]
pub struct StageOneFit {
    /// `q × p`; column `j` regresses `x_j` on the instruments.
    pub gamma_hat: Matrix,
    pub penalties: Vec<f64>,
    /// `X̂ = ZΓ̂` with the centered instruments.
    pub fitted: Matrix,
    pub diagnostics: Vec<ColumnDiagnostics>,
}

impl StageOneFit {
    pub fn support(&self, j: usize) -> Vec<usize> {
        self.gamma_hat
            .col(j)
            .iter()
            .enumerate()
            .filter(|(_, g)| **g != 0.0)
            .map(|(i, _)| i)
            .collect()
    }
}

/// Residual scale of each column of `x` after a light ridge fit on `z`.
///
/// The ridge parameter is `0.1 · tr(G)/q` with `G = ZᵀZ/n`; `σ̂²` is the
/// residual sum of squares over `n − df` with the usual ridge degrees of
/// freedom.
pub fn ridge_pilot_scales(x: &Matrix, z: &Matrix) -> Result<Vec<f64>, TwoStageError> {
    let n = z.rows();
    let q = z.cols();
    let nf = n as f64;
    let mut g = z.gram();
    g.scale_in_place(1.0 / nf);
    let trace: f64 = (0..q).map(|i| g[(i, i)]).sum();
    let alpha = 0.1 * trace / q as f64;
    if !(alpha > 0.0) {
        return Ok(x.columns().map(|c| (dot(c, c) / nf).sqrt()).collect());
    }
    let eig = sym_eigen(&g, q)?;
    let df: f64 = eig.values.iter().map(|l| l.max(0.0) / (l.max(0.0) + alpha)).sum();
    let denom = (nf - df).max(1.0);
    let scales = x
        .columns()
        .map(|xj| {
            let c: Vec<f64> = z.tr_mul_vec(xj).into_iter().map(|v| v / nf).collect();
            // β = V diag(1/(λ+α)) Vᵀ c ; RSS/n = yᵀy/n − 2βᵀc + βᵀGβ
            let mut lin = 0.0;
            let mut quad = 0.0;
            for k in 0..q {
                let l = eig.values[k].max(0.0);
                let proj = dot(eig.vector(k), &c);
                let coef = proj / (l + alpha);
                lin += coef * proj;
                quad += coef * coef * l;
            }
            let rss = (dot(xj, xj) / nf - 2.0 * lin + quad).max(0.0) * nf;
            (rss / denom).sqrt()
        })
        .collect();
    Ok(scales)
}

/// Lasso of every column of `x` on the instruments `z`; both are centered
/// internally.
pub fn stage_one(
    x: &Matrix,
    z: &Matrix,
    tuning: &StageOneTuning,
    opts: &LassoOptions,
) -> Result<StageOneFit, TwoStageError> {
    let n = x.rows();
    if z.rows() != n {
        return Err(TwoStageError::DimensionMismatch(format!(
            "x has {n} rows, z has {}",
            z.rows()
        )));
    }
    let p = x.cols();
    let q = z.cols();
    let xc = x.centered();
    let zc = z.centered();
    let mut gram = zc.gram();
    gram.scale_in_place(1.0 / n as f64);
    let path_opts = PathOptions::for_tuning(n);

    let fixed: Option<Vec<f64>> = match tuning {
        StageOneTuning::Fixed(v) => {
            if v.len() != 1 && v.len() != p {
                return Err(TwoStageError::PenaltyCount {
                    expected: p,
                    got: v.len(),
                });
            }
            Some((0..p).map(|j| if v.len() == 1 { v[0] } else { v[j] }).collect())
        }
        StageOneTuning::TheoryRate { c0 } => {
            let sigma = ridge_pilot_scales(&xc, &zc)?;
            let rate = (((p * q) as f64).ln().max(0.0) / n as f64).sqrt();
            Some(sigma.iter().map(|s| c0 * s * rate).collect())
        }
        _ => None,
    };
    let plans = match tuning {
        StageOneTuning::Cv { folds, seed } => {
            let mut rng = SeededRng::new(*seed);
            vec![CvPlan::random(&zc, *folds, &mut rng)?]
        }
        _ => Vec::new(),
    };

    let mut gamma = Matrix::zeros(q, p);
    let mut penalties = Vec::with_capacity(p);
    let mut diagnostics = Vec::with_capacity(p);
    for j in 0..p {
        let xj = xc.col(j);
        let result = match (&fixed, tuning) {
            (Some(mu), _) => {
                let sys = CovSystem::with_gram(&gram, &zc, xj);
                solve_cov(&sys, mu[j], None, opts)
            }
            (None, StageOneTuning::Cv { .. }) => {
                cv_select(&zc, &gram, &plans, xj, None, CvRule::Min, opts, &path_opts).map(|r| r.fit)
            }
            _ => {
                let sys = CovSystem::with_gram(&gram, &zc, xj);
                bic_select(&sys, None, opts, &path_opts).map(|r| r.fit)
            }
        };
        let fit = result.map_err(|source| TwoStageError::StageOne { column: j, source })?;
        gamma.col_mut(j).copy_from_slice(&fit.coefficients);
        penalties.push(fit.penalty);
        diagnostics.push(ColumnDiagnostics {
            support_size: fit.df(),
            iterations: fit.iterations,
            kkt_residual: fit.kkt_residual,
        });
    }
    let fitted = zc.matmul(&gamma);
    Ok(StageOneFit {
        gamma_hat: gamma,
        penalties,
        fitted,
        diagnostics,
    })
}
