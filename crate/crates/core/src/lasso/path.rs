use crate::numkit::Matrix;

use super::problem::check_centered;
use super::solver::{solve_cov_cached, CovSystem, FactorCache, LassoFit, LassoOptions};
use super::LassoError;

#[derive(Debug, Clone)]
pub struct PathOptions {
    pub n_grid: usize,
    /// Smallest grid penalty as a fraction of `μ_max`.
    pub min_ratio: f64,
    /// Stop once more than this many coefficients are active.
    pub dfmax: Option<usize>,
    /// Stop once the fraction of `‖y‖²` explained reaches this value.
    pub max_dev_ratio: Option<f64>,
}

impl Default for PathOptions {
    fn default() -> Self {
        Self {
            n_grid: 100,
            min_ratio: 1e-3,
            dfmax: None,
            max_dev_ratio: None,
        }
    }
}

impl PathOptions {
    /// Path settings used while tuning: the path is truncated once it
    /// saturates (`df > n/2`, or 99.9% of the response sum of squares
    /// explained), where no criterion would pick it anyway.
    pub fn for_tuning(n: usize) -> Self {
        Self {
            dfmax: Some((n / 2).max(1)),
            max_dev_ratio: Some(0.999),
            ..Self::default()
        }
    }
}

/// `n_grid` log-spaced penalties from `mu_max` down to `min_ratio * mu_max`.
pub fn penalty_grid(mu_max: f64, n_grid: usize, min_ratio: f64) -> Vec<f64> {
    if mu_max <= 0.0 || n_grid <= 1 {
        return vec![mu_max.max(0.0)];
    }
    let lo = min_ratio.ln();
    (0..n_grid)
        .map(|i| {
            if i == 0 {
                mu_max
            } else {
                mu_max * (lo * i as f64 / (n_grid - 1) as f64).exp()
            }
        })
        .collect()
}

/// Warm-started fits along `grid` (must be descending).
///
/// Early-stopping rules in `path_opts` may truncate the returned list.
pub fn path_cov(
    sys: &CovSystem<'_>,
    grid: &[f64],
    opts: &LassoOptions,
    path_opts: &PathOptions,
) -> Result<Vec<LassoFit>, LassoError> {
    if grid.windows(2).any(|w| w[1] > w[0]) {
        return Err(LassoError::InvalidGrid("penalties must be non-increasing".into()));
    }
    let mut fits: Vec<LassoFit> = Vec::with_capacity(grid.len());
    let mut cache = FactorCache::default();
    for &mu in grid {
        let warm = fits.last().map(|f| f.coefficients.as_slice());
        let fit = solve_cov_cached(sys, mu, warm, opts, &mut cache)?;
        if let Some(dfmax) = path_opts.dfmax {
            if fit.df() > dfmax && !fits.is_empty() {
                break;
            }
        }
        let explained = if sys.yty > 0.0 {
            1.0 - fit.rss_over_n / sys.yty
        } else {
            1.0
        };
        fits.push(fit);
        if let Some(limit) = path_opts.max_dev_ratio {
            if explained >= limit {
                break;
            }
        }
    }
    Ok(fits)
}

/// Grid (default or supplied) for a covariance system.
pub fn grid_for(sys: &CovSystem<'_>, grid: Option<&[f64]>, path_opts: &PathOptions) -> Vec<f64> {
    match grid {
        Some(g) => g.to_vec(),
        None => penalty_grid(sys.max_penalty(), path_opts.n_grid, path_opts.min_ratio),
    }
}

/// Lasso regularisation path on centered data.
pub fn path(
    design: &Matrix,
    response: &[f64],
    grid: Option<&[f64]>,
    opts: &LassoOptions,
    path_opts: &PathOptions,
) -> Result<Vec<LassoFit>, LassoError> {
    check_centered(design, response)?;
    let sys = CovSystem::from_data(design, response);
    let grid = grid_for(&sys, grid, path_opts);
    path_cov(&sys, &grid, opts, path_opts)
}
