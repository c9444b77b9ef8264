//! Penalty selection by K-fold cross-validation or BIC.
//!
//! Cross-validation works entirely on sufficient statistics: each fold keeps
//! its raw `X_fᵀX_f`, column sums and size, training moments are the
//! complement, and held-out squared error is expanded from the same moments.
//! Training folds are re-centered, i.e. every fold fit carries an implicit
//! intercept.

use std::borrow::Cow;

use serde::Serialize;

use crate::numkit::{dot, Matrix, SeededRng};

use super::path::{grid_for, path_cov, PathOptions};
use super::problem::check_centered;
use super::solver::{CovSystem, LassoFit, LassoOptions};
use super::LassoError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum TuningMethod {
    Cv,
    Bic,
    Fixed,
}

/// Which point of the CV curve is chosen.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum CvRule {
    /// Minimum mean held-out error (ties to the larger penalty).
    #[default]
    Min,
    /// Largest penalty whose mean error is within one standard error of
    /// the minimum.
    OneSe,
}

#[derive(Debug, Clone)]
pub struct TuningReport {
    pub method: TuningMethod,
    /// Evaluated penalties, descending.
    pub grid: Vec<f64>,
    /// Mean held-out squared error (CV) or BIC per grid point.
    pub criterion: Vec<f64>,
    /// Standard error of the CV curve.
    pub std_error: Option<Vec<f64>>,
    pub chosen_index: usize,
    pub chosen: f64,
    /// Full-data fit at the chosen penalty.
    pub fit: LassoFit,
}

impl PartialEq for TuningReport {
    fn eq(&self, other: &Self) -> bool {
        self.method == other.method
            && self.grid == other.grid
            && self.criterion == other.criterion
            && self.std_error == other.std_error
            && self.chosen_index == other.chosen_index
            && self.chosen == other.chosen
            && self.fit.coefficients == other.fit.coefficients
    }
}

/// Assigns a random fold label to each of `n` observations; sizes differ
/// by at most one.
pub fn random_folds(n: usize, k: usize, rng: &mut SeededRng) -> Result<Vec<Vec<usize>>, LassoError> {
    if k < 2 || n < k {
        return Err(LassoError::DegenerateFolds { n, folds: k });
    }
    let perm = rng.permutation(n);
    let mut folds = vec![Vec::with_capacity(n / k + 1); k];
    for (pos, &i) in perm.iter().enumerate() {
        folds[pos % k].push(i);
    }
    for f in &mut folds {
        f.sort_unstable();
    }
    Ok(folds)
}

#[derive(Debug, Clone)]
struct FoldMoments {
    idx: Vec<usize>,
    /// raw `X_fᵀX_f`
    xtx: Matrix,
    xsum: Vec<f64>,
    /// centered training `X_tᵀX_t / n_t`
    train_gram: Matrix,
    train_mean: Vec<f64>,
    train_n: usize,
}

/// Design-side moments for one fold partition, reusable across responses.
#[derive(Debug, Clone)]
pub struct CvPlan {
    n: usize,
    folds: Vec<FoldMoments>,
}

impl CvPlan {
    pub fn new(design: &Matrix, folds: Vec<Vec<usize>>) -> Result<Self, LassoError> {
        let n = design.rows();
        let m = design.cols();
        let k = folds.len();
        if k < 2 || folds.iter().any(Vec::is_empty) {
            return Err(LassoError::DegenerateFolds { n, folds: k });
        }
        let mut seen = vec![false; n];
        for &i in folds.iter().flatten() {
            if i >= n || seen[i] {
                return Err(LassoError::InvalidGrid(format!(
                    "fold index {i} out of range or repeated"
                )));
            }
            seen[i] = true;
        }
        if seen.iter().any(|s| !s) {
            return Err(LassoError::InvalidGrid("folds do not cover every observation".into()));
        }

        let parts: Vec<(Matrix, Vec<f64>)> = folds
            .iter()
            .map(|idx| {
                let sub = design.select_rows(idx);
                let sums = sub.columns().map(|c| c.iter().sum()).collect();
                (sub.gram(), sums)
            })
            .collect();
        let mut total = Matrix::zeros(m, m);
        let mut total_sum = vec![0.0; m];
        for (g, s) in &parts {
            total = total.add(g);
            total_sum.iter_mut().zip(s).for_each(|(t, v)| *t += v);
        }

        let folds = folds
            .into_iter()
            .zip(parts)
            .map(|(idx, (xtx, xsum))| {
                let nt = n - idx.len();
                let ntf = nt as f64;
                let mean: Vec<f64> = total_sum
                    .iter()
                    .zip(&xsum)
                    .map(|(t, f)| (t - f) / ntf)
                    .collect();
                let mut train = total.sub(&xtx);
                for j in 0..m {
                    for i in 0..m {
                        train[(i, j)] = (train[(i, j)] - ntf * mean[i] * mean[j]) / ntf;
                    }
                }
                FoldMoments {
                    idx,
                    xtx,
                    xsum,
                    train_gram: train,
                    train_mean: mean,
                    train_n: nt,
                }
            })
            .collect();
        Ok(Self { n, folds })
    }

    pub fn random(design: &Matrix, k: usize, rng: &mut SeededRng) -> Result<Self, LassoError> {
        let folds = random_folds(design.rows(), k, rng)?;
        Self::new(design, folds)
    }

    pub fn fold_indices(&self) -> Vec<Vec<usize>> {
        self.folds.iter().map(|f| f.idx.clone()).collect()
    }

    pub fn n_folds(&self) -> usize {
        self.folds.len()
    }

    /// Held-out mean squared error of each fold at the first `len` grid
    /// points. Returns per-fold curves (a fold path may stop early).
    fn fold_curves(
        &self,
        design: &Matrix,
        response: &[f64],
        grid: &[f64],
        opts: &LassoOptions,
        path_opts: &PathOptions,
    ) -> Result<Vec<Vec<f64>>, LassoError> {
        let ytot: f64 = response.iter().sum();
        let yytot = dot(response, response);
        let xytot = design.tr_mul_vec(response);
        let mut curves = Vec::with_capacity(self.folds.len());
        for f in &self.folds {
            let yf: Vec<f64> = f.idx.iter().map(|&i| response[i]).collect();
            let sub = design.select_rows(&f.idx);
            let xy_f = sub.tr_mul_vec(&yf);
            let sy_f: f64 = yf.iter().sum();
            let yy_f = dot(&yf, &yf);
            let nf = f.idx.len() as f64;
            let nt = f.train_n as f64;
            let ybar = (ytot - sy_f) / nt;
            let xty: Vec<f64> = xytot
                .iter()
                .zip(&xy_f)
                .zip(&f.train_mean)
                .map(|((tot, fo), xm)| ((tot - fo) - nt * xm * ybar) / nt)
                .collect();
            let yty = ((yytot - yy_f) - nt * ybar * ybar) / nt;
            let sys = CovSystem {
                n: f.train_n,
                gram: Cow::Borrowed(&f.train_gram),
                xty,
                yty,
            };
            let fits = path_cov(&sys, grid, opts, path_opts)?;

            let sum_a2 = yy_f - 2.0 * ybar * sy_f + nf * ybar * ybar;
            let curve = fits
                .iter()
                .map(|fit| {
                    let beta = &fit.coefficients;
                    let act = fit.active_set();
                    let b_xbar: f64 = act.iter().map(|&j| beta[j] * f.train_mean[j]).sum();
                    let b_sx: f64 = act.iter().map(|&j| beta[j] * f.xsum[j]).sum();
                    let b_xy: f64 = act.iter().map(|&j| beta[j] * xy_f[j]).sum();
                    let mut quad = 0.0;
                    for &j in &act {
                        let col = f.xtx.col(j);
                        let s: f64 = act.iter().map(|&k| col[k] * beta[k]).sum();
                        quad += beta[j] * s;
                    }
                    let cross = b_xy - ybar * b_sx - b_xbar * sy_f + nf * ybar * b_xbar;
                    let bb = quad - 2.0 * b_xbar * b_sx + nf * b_xbar * b_xbar;
                    (sum_a2 - 2.0 * cross + bb).max(0.0) / nf
                })
                .collect();
            curves.push(curve);
        }
        Ok(curves)
    }
}

fn argmin_first(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, v) in values.iter().enumerate() {
        if *v < values[best] {
            best = i;
        }
    }
    best
}

/// CV selection for a centered design whose full-data Gram `XᵀX/n` is
/// already known. Errors are averaged over all supplied partitions.
pub fn cv_select(
    design: &Matrix,
    full_gram: &Matrix,
    plans: &[CvPlan],
    response: &[f64],
    grid: Option<&[f64]>,
    rule: CvRule,
    opts: &LassoOptions,
    path_opts: &PathOptions,
) -> Result<TuningReport, LassoError> {
    if plans.is_empty() {
        return Err(LassoError::DegenerateFolds {
            n: design.rows(),
            folds: 0,
        });
    }
    let sys = CovSystem::with_gram(full_gram, design, response);
    let grid = grid_for(&sys, grid, path_opts);
    let full = path_cov(&sys, &grid, opts, path_opts)?;
    cv_from_full(design, &grid, &full, plans, response, rule, opts, path_opts)
}

/// CV selection reusing an already computed full-data path over `grid`.
pub fn cv_from_full(
    design: &Matrix,
    grid: &[f64],
    full: &[LassoFit],
    plans: &[CvPlan],
    response: &[f64],
    rule: CvRule,
    opts: &LassoOptions,
    path_opts: &PathOptions,
) -> Result<TuningReport, LassoError> {
    if plans.is_empty() || full.is_empty() {
        return Err(LassoError::DegenerateFolds {
            n: design.rows(),
            folds: 0,
        });
    }
    let mut len = full.len().min(grid.len());

    let mut fold_mse: Vec<(f64, Vec<f64>)> = Vec::new();
    for plan in plans {
        debug_assert_eq!(plan.n, design.rows());
        let curves = plan.fold_curves(design, response, &grid[..len], opts, path_opts)?;
        for (c, f) in curves.into_iter().zip(&plan.folds) {
            len = len.min(c.len());
            fold_mse.push((f.idx.len() as f64, c));
        }
    }
    let total_w: f64 = fold_mse.iter().map(|(w, _)| w).sum();
    let k = fold_mse.len() as f64;
    let mut cvm = vec![0.0; len];
    let mut cvsd = vec![0.0; len];
    for g in 0..len {
        let m = fold_mse.iter().map(|(w, c)| w * c[g]).sum::<f64>() / total_w;
        let var = fold_mse.iter().map(|(w, c)| w * (c[g] - m).powi(2)).sum::<f64>() / total_w;
        cvm[g] = m;
        cvsd[g] = (var / (k - 1.0).max(1.0)).sqrt();
    }
    let min_index = argmin_first(&cvm);
    let limit = cvm[min_index] + cvsd[min_index];
    let one_se_index = (0..=min_index).find(|&g| cvm[g] <= limit).unwrap_or(min_index);
    let best = match rule {
        CvRule::Min => min_index,
        CvRule::OneSe => one_se_index,
    };
    Ok(TuningReport {
        method: TuningMethod::Cv,
        grid: grid[..len].to_vec(),
        criterion: cvm,
        std_error: Some(cvsd),
        chosen_index: best,
        chosen: grid[best],
        fit: full[best].clone(),
    })
}

/// K-fold (optionally repeated) cross-validation on centered data.
pub fn tune_cv(
    design: &Matrix,
    response: &[f64],
    folds: usize,
    repeats: usize,
    rng: &mut SeededRng,
    opts: &LassoOptions,
    path_opts: &PathOptions,
) -> Result<TuningReport, LassoError> {
    check_centered(design, response)?;
    let n = design.rows();
    if folds < 2 || n < folds {
        return Err(LassoError::DegenerateFolds { n, folds });
    }
    let plans = (0..repeats.max(1))
        .map(|_| CvPlan::random(design, folds, rng))
        .collect::<Result<Vec<_>, _>>()?;
    let mut gram = design.gram();
    gram.scale_in_place(1.0 / n as f64);
    cv_select(design, &gram, &plans, response, None, CvRule::Min, opts, path_opts)
}

/// `n log(RSS/n) + df log n`, with `RSS` floored at `1e-12 ‖y‖²`.
pub fn bic_value(n: usize, rss: f64, yty: f64, df: usize) -> f64 {
    let nf = n as f64;
    let floor = (1e-12 * yty).max(f64::MIN_POSITIVE);
    nf * (rss.max(floor) / nf).ln() + df as f64 * nf.ln()
}

/// BIC selection along the path of a covariance system.
pub fn bic_select(
    sys: &CovSystem<'_>,
    grid: Option<&[f64]>,
    opts: &LassoOptions,
    path_opts: &PathOptions,
) -> Result<TuningReport, LassoError> {
    if sys.n < 2 {
        return Err(LassoError::DegenerateFolds { n: sys.n, folds: 0 });
    }
    let grid = grid_for(sys, grid, path_opts);
    let fits = path_cov(sys, &grid, opts, path_opts)?;
    let nf = sys.n as f64;
    let crit: Vec<f64> = fits
        .iter()
        .map(|f| bic_value(sys.n, f.rss_over_n * nf, sys.yty * nf, f.df()))
        .collect();
    let best = argmin_first(&crit);
    Ok(TuningReport {
        method: TuningMethod::Bic,
        grid: grid[..fits.len()].to_vec(),
        criterion: crit,
        std_error: None,
        chosen_index: best,
        chosen: grid[best],
        fit: fits[best].clone(),
    })
}

pub fn tune_bic(
    design: &Matrix,
    response: &[f64],
    opts: &LassoOptions,
    path_opts: &PathOptions,
) -> Result<TuningReport, LassoError> {
    check_centered(design, response)?;
    let sys = CovSystem::from_data(design, response);
    bic_select(&sys, None, opts, path_opts)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn folds_are_balanced_partitions() {
        let mut rng = SeededRng::new(5);
        let folds = random_folds(23, 10, &mut rng).unwrap();
        let sizes: Vec<usize> = folds.iter().map(Vec::len).collect();
        assert_eq!(sizes.iter().sum::<usize>(), 23);
        assert!(sizes.iter().max().unwrap() - sizes.iter().min().unwrap() <= 1);
        let mut all: Vec<usize> = folds.concat();
        all.sort_unstable();
        assert_eq!(all, (0..23).collect::<Vec<_>>());
        assert!(random_folds(5, 10, &mut rng).is_err());
        assert!(random_folds(5, 1, &mut rng).is_err());
    }

    #[test]
    fn bic_floor_guards_perfect_fit() {
        let b = bic_value(10, 0.0, 4.0, 1);
        let expected = 10.0 * (4e-12_f64 / 10.0).ln() + 10.0_f64.ln();
        assert!((b - expected).abs() < 1e-9);
    }

    #[test]
    fn held_out_error_matches_direct_computation() {
        // Moments-based held-out error against explicit refit with intercept.
        let mut rng = SeededRng::new(11);
        let n = 30;
        let mut x = Matrix::zeros(n, 3);
        for j in 0..3 {
            for i in 0..n {
                x[(i, j)] = rng.normal();
            }
        }
        x.center_columns();
        let mut y: Vec<f64> = (0..n).map(|i| x[(i, 0)] - 0.5 * x[(i, 2)] + 0.3 * rng.normal()).collect();
        crate::numkit::center(&mut y);
        let folds = random_folds(n, 3, &mut rng).unwrap();
        let plan = CvPlan::new(&x, folds.clone()).unwrap();
        let grid = [0.2, 0.05];
        let opts = LassoOptions {
            tol: 1e-13,
            kkt_target: 1e-13,
            ..LassoOptions::default()
        };
        let curves = plan
            .fold_curves(&x, &y, &grid, &opts, &PathOptions::default())
            .unwrap();
        for (f, test) in folds.iter().enumerate() {
            let train: Vec<usize> = (0..n).filter(|i| !test.contains(i)).collect();
            let mut xt = x.select_rows(&train);
            let xmean = xt.center_columns();
            let mut yt: Vec<f64> = train.iter().map(|&i| y[i]).collect();
            let ymean = crate::numkit::center(&mut yt);
            let sys = CovSystem::from_data(&xt, &yt);
            for (g, &mu) in grid.iter().enumerate() {
                let fit = super::super::solver::solve_cov(&sys, mu, None, &opts).unwrap();
                let mse = test
                    .iter()
                    .map(|&i| {
                        let pred: f64 = ymean
                            + (0..3)
                                .map(|j| (x[(i, j)] - xmean[j]) * fit.coefficients[j])
                                .sum::<f64>();
                        (y[i] - pred).powi(2)
                    })
                    .sum::<f64>()
                    / test.len() as f64;
                assert!((mse - curves[f][g]).abs() < 1e-9, "fold {f} grid {g}");
            }
        }
    }
}
