//! Covariance-update coordinate descent for
//! `(1/2n)‖y - Xβ‖² + μ‖β‖₁`.
//!
//! The solver only sees the normalised moments `G = XᵀX/n`, `c = Xᵀy/n`
//! and `yᵀy/n`, so one Gram matrix can be shared by many responses and by
//! every point of a path.

use std::borrow::Cow;

use crate::numkit::{cholesky, cholesky_solve, dot, Matrix};

use super::LassoError;

/// Contractual bound on the KKT residual of a returned fit.
pub const KKT_TOL: f64 = 1e-6;

/// Smallest relative coefficient-change tolerance used while refining.
const TOL_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone)]
pub struct LassoOptions {
    /// Cap on coordinate sweeps (full or active-set).
    pub max_sweeps: usize,
    /// Converged when the largest coefficient change in a sweep is at most
    /// `tol * max(1, ‖β‖∞)`.
    pub tol: f64,
    /// Internal KKT target; tightened sweeps continue until it is met.
    pub kkt_target: f64,
    /// Rescale columns to unit variance before penalising.
    pub standardize: bool,
    /// Record the objective after every sweep.
    pub trace_objective: bool,
}

impl Default for LassoOptions {
    fn default() -> Self {
        Self {
            max_sweeps: 100_000,
            tol: 1e-7,
            kkt_target: 1e-7,
            standardize: false,
            trace_objective: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LassoFit {
    pub coefficients: Vec<f64>,
    pub penalty: f64,
    /// Coordinate sweeps performed.
    pub iterations: usize,
    pub kkt_residual: f64,
    pub objective: f64,
    /// `‖y − Xβ‖²/n` at the returned coefficients.
    pub rss_over_n: f64,
    /// Per-sweep objective values; empty unless tracing was requested.
    pub objective_trace: Vec<f64>,
}

impl LassoFit {
    pub fn active_set(&self) -> Vec<usize> {
        self.coefficients
            .iter()
            .enumerate()
            .filter(|(_, b)| **b != 0.0)
            .map(|(j, _)| j)
            .collect()
    }

    pub fn df(&self) -> usize {
        self.coefficients.iter().filter(|b| **b != 0.0).count()
    }
}

/// Normalised second moments of a (centered) regression problem.
#[derive(Debug, Clone)]
pub struct CovSystem<'g> {
    pub n: usize,
    /// `XᵀX / n`
    pub gram: Cow<'g, Matrix>,
    /// `Xᵀy / n`
    pub xty: Vec<f64>,
    /// `yᵀy / n`
    pub yty: f64,
}

impl<'g> CovSystem<'g> {
    pub fn from_data(x: &Matrix, y: &[f64]) -> CovSystem<'static> {
        let n = x.rows();
        let nf = n as f64;
        let mut gram = x.gram();
        gram.scale_in_place(1.0 / nf);
        CovSystem {
            n,
            gram: Cow::Owned(gram),
            xty: x.tr_mul_vec(y).into_iter().map(|v| v / nf).collect(),
            yty: dot(y, y) / nf,
        }
    }

    /// Uses a precomputed `XᵀX/n`.
    pub fn with_gram(gram: &'g Matrix, x: &Matrix, y: &[f64]) -> CovSystem<'g> {
        let nf = x.rows() as f64;
        CovSystem {
            n: x.rows(),
            gram: Cow::Borrowed(gram),
            xty: x.tr_mul_vec(y).into_iter().map(|v| v / nf).collect(),
            yty: dot(y, y) / nf,
        }
    }

    pub fn dim(&self) -> usize {
        self.xty.len()
    }

    /// `‖Xᵀy/n‖∞`, the smallest penalty with an all-zero solution.
    pub fn max_penalty(&self) -> f64 {
        self.xty.iter().fold(0.0_f64, |m, v| m.max(v.abs()))
    }

    /// `‖y - Xβ‖² / n`.
    pub fn rss_over_n(&self, beta: &[f64]) -> f64 {
        let active: Vec<usize> = active_indices(beta);
        let mut quad = 0.0;
        for &j in &active {
            let col = self.gram.col(j);
            let mut s = 0.0;
            for &k in &active {
                s += col[k] * beta[k];
            }
            quad += beta[j] * s;
        }
        let lin: f64 = active.iter().map(|&j| beta[j] * self.xty[j]).sum();
        (self.yty - 2.0 * lin + quad).max(0.0)
    }

    pub fn objective(&self, beta: &[f64], mu: f64) -> f64 {
        0.5 * self.rss_over_n(beta) + mu * beta.iter().map(|b| b.abs()).sum::<f64>()
    }

    /// `Xᵀ(y - Xβ)/n` recomputed from scratch.
    pub fn gradient(&self, beta: &[f64]) -> Vec<f64> {
        let mut g = self.xty.clone();
        for j in active_indices(beta) {
            let bj = beta[j];
            for (gi, gji) in g.iter_mut().zip(self.gram.col(j)) {
                *gi -= bj * gji;
            }
        }
        g
    }

    pub fn kkt_residual(&self, beta: &[f64], mu: f64) -> f64 {
        kkt_from_gradient(&self.gradient(beta), beta, mu)
    }

    /// Column-scaled copy for standardised fitting; returns the scales.
    pub fn standardized(&self) -> (CovSystem<'static>, Vec<f64>) {
        let m = self.dim();
        let scales: Vec<f64> = (0..m)
            .map(|j| {
                let v = self.gram[(j, j)];
                if v > 0.0 {
                    v.sqrt()
                } else {
                    1.0
                }
            })
            .collect();
        let mut gram = Matrix::zeros(m, m);
        for j in 0..m {
            for i in 0..m {
                gram[(i, j)] = self.gram[(i, j)] / (scales[i] * scales[j]);
            }
        }
        let xty = self.xty.iter().zip(&scales).map(|(c, s)| c / s).collect();
        (
            CovSystem {
                n: self.n,
                gram: Cow::Owned(gram),
                xty,
                yty: self.yty,
            },
            scales,
        )
    }
}

fn active_indices(beta: &[f64]) -> Vec<usize> {
    beta.iter()
        .enumerate()
        .filter(|(_, b)| **b != 0.0)
        .map(|(j, _)| j)
        .collect()
}

pub(crate) fn kkt_from_gradient(g: &[f64], beta: &[f64], mu: f64) -> f64 {
    g.iter()
        .zip(beta)
        .map(|(&gj, &bj)| {
            if bj == 0.0 {
                (gj.abs() - mu).max(0.0)
            } else {
                (gj - mu * bj.signum()).abs()
            }
        })
        .fold(0.0, f64::max)
}

#[inline]
pub fn soft_threshold(z: f64, t: f64) -> f64 {
    if z > t {
        z - t
    } else if z < -t {
        z + t
    } else {
        0.0
    }
}

/// Solves the lasso on a covariance system, warm-starting from `warm`.
///
/// With `opts.standardize` the penalty applies to unit-variance columns and
/// the reported KKT residual refers to that scaled problem; coefficients are
/// mapped back to the original scale.
pub fn solve_cov(
    sys: &CovSystem<'_>,
    mu: f64,
    warm: Option<&[f64]>,
    opts: &LassoOptions,
) -> Result<LassoFit, LassoError> {
    solve_cov_cached(sys, mu, warm, opts, &mut FactorCache::default())
}

/// Cholesky factor of the Gram block of the last active set tried by the
/// direct step. Reusable across solves on the same system.
#[derive(Debug, Default)]
pub(crate) struct FactorCache {
    active: Vec<usize>,
    factor: Option<Matrix>,
}

impl FactorCache {
    fn factor_for(&mut self, gram: &Matrix, act: &[usize]) -> Option<&Matrix> {
        if self.active != act || self.factor.is_none() {
            let k = act.len();
            let mut sub = Matrix::zeros(k, k);
            for (b, &j) in act.iter().enumerate() {
                let col = gram.col(j);
                for (a, &i) in act.iter().enumerate() {
                    sub[(a, b)] = col[i];
                }
            }
            self.active = act.to_vec();
            self.factor = cholesky(&sub).ok();
        }
        self.factor.as_ref()
    }
}

pub(crate) fn solve_cov_cached(
    sys: &CovSystem<'_>,
    mu: f64,
    warm: Option<&[f64]>,
    opts: &LassoOptions,
    cache: &mut FactorCache,
) -> Result<LassoFit, LassoError> {
    if !(mu >= 0.0) || !mu.is_finite() {
        return Err(LassoError::InvalidPenalty(mu));
    }
    if let Some(w) = warm {
        if w.len() != sys.dim() {
            return Err(LassoError::DimensionMismatch {
                detail: format!("warm start has {} entries, design has {}", w.len(), sys.dim()),
            });
        }
    }
    if opts.standardize {
        let (scaled, scales) = sys.standardized();
        let warm_scaled: Option<Vec<f64>> =
            warm.map(|w| w.iter().zip(&scales).map(|(b, s)| b * s).collect());
        let inner = LassoOptions {
            standardize: false,
            ..opts.clone()
        };
        let unscale = |mut fit: LassoFit| {
            fit.coefficients
                .iter_mut()
                .zip(&scales)
                .for_each(|(b, s)| *b /= s);
            fit
        };
        return match solve_cov(&scaled, mu, warm_scaled.as_deref(), &inner) {
            Ok(fit) => Ok(unscale(fit)),
            Err(LassoError::MaxIterations { fit }) => Err(LassoError::MaxIterations {
                fit: Box::new(unscale(*fit)),
            }),
            Err(e) => Err(e),
        };
    }

    let m = sys.dim();
    let mut beta = warm.map_or_else(|| vec![0.0; m], <[f64]>::to_vec);
    let state = descend(sys, mu, &mut beta, opts, cache);
    let g = sys.gradient(&beta);
    // ‖y − Xβ‖²/n = yᵀy/n − βᵀ(Xᵀy/n) − βᵀg.
    let rss_over_n = (sys.yty - dot(&beta, &sys.xty) - dot(&beta, &g)).max(0.0);
    let objective = 0.5 * rss_over_n + mu * beta.iter().map(|b| b.abs()).sum::<f64>();
    if !objective.is_finite() || beta.iter().any(|b| !b.is_finite()) {
        return Err(LassoError::NonFinite);
    }
    let fit = LassoFit {
        kkt_residual: kkt_from_gradient(&g, &beta, mu),
        coefficients: beta,
        rss_over_n,
        penalty: mu,
        iterations: state.sweeps,
        objective,
        objective_trace: state.trace,
    };
    if state.converged {
        Ok(fit)
    } else {
        Err(LassoError::MaxIterations { fit: Box::new(fit) })
    }
}

struct DescentState {
    sweeps: usize,
    converged: bool,
    trace: Vec<f64>,
}

fn descend(
    sys: &CovSystem<'_>,
    mu: f64,
    beta: &mut [f64],
    opts: &LassoOptions,
    cache: &mut FactorCache,
) -> DescentState {
    let m = sys.dim();
    let gram = sys.gram.as_ref();
    let diag: Vec<f64> = (0..m).map(|j| gram[(j, j)]).collect();
    let mut state = DescentState {
        sweeps: 0,
        converged: false,
        trace: Vec::new(),
    };
    let mut tol = opts.tol;
    let record = |state: &mut DescentState, beta: &[f64]| {
        if opts.trace_objective {
            state.trace.push(sys.objective(beta, mu));
        }
    };
    // Zero columns never enter.
    for j in 0..m {
        if diag[j] <= 0.0 {
            beta[j] = 0.0;
        }
    }
    if opts.trace_objective {
        state.trace.push(sys.objective(beta, mu));
    }

    let mut refinements = 0;
    let mut last_kkt = f64::INFINITY;
    let floor = TOL_FLOOR.min(opts.tol);
    // The KKT target is relative to the scale of the gradient at zero.
    let kkt_target = opts.kkt_target * sys.max_penalty().max(1.0);
    loop {
        // Full sweep with an exact gradient.
        let mut g = sys.gradient(beta);
        let mut max_change = 0.0_f64;
        let mut support_changed = false;
        // Round-off flips of negligible coordinates do not count.
        let flip_floor = floor * beta.iter().fold(1.0_f64, |a, b| a.max(b.abs()));
        for j in 0..m {
            if diag[j] <= 0.0 {
                continue;
            }
            let old = beta[j];
            let new = soft_threshold(g[j] + diag[j] * old, mu) / diag[j];
            if new != old {
                let delta = new - old;
                beta[j] = new;
                for (gi, gji) in g.iter_mut().zip(gram.col(j)) {
                    *gi -= delta * gji;
                }
                max_change = max_change.max(delta.abs());
                support_changed |= (old == 0.0) != (new == 0.0) && delta.abs() > flip_floor;
            }
        }
        state.sweeps += 1;
        record(&mut state, beta);

        let scale = beta.iter().fold(1.0_f64, |a, b| a.max(b.abs()));
        if !support_changed && max_change <= tol * scale {
            let kkt = kkt_from_gradient(&sys.gradient(beta), beta, mu);
            // Stop refining once rounding dominates: no tolerance left or
            // the residual no longer halves.
            if kkt <= kkt_target || refinements >= 6 || tol <= floor || kkt > 0.5 * last_kkt {
                state.converged = true;
                return state;
            }
            last_kkt = kkt;
            refinements += 1;
            tol = (tol * 0.01).max(floor);
        }
        if state.sweeps >= opts.max_sweeps {
            return state;
        }

        // Cycle over the active set; the gradient is kept current on it only.
        let active = active_indices(beta);
        if active.is_empty() {
            continue;
        }
        if active_set_step(sys, mu, beta, &active, cache) {
            state.sweeps += 1;
            record(&mut state, beta);
            if state.sweeps >= opts.max_sweeps {
                return state;
            }
            continue;
        }
        let mut g_act: Vec<f64> = active.iter().map(|&j| g[j]).collect();
        loop {
            let mut max_change = 0.0_f64;
            for (a, &j) in active.iter().enumerate() {
                let old = beta[j];
                let new = soft_threshold(g_act[a] + diag[j] * old, mu) / diag[j];
                if new != old {
                    let delta = new - old;
                    beta[j] = new;
                    let col = gram.col(j);
                    for (gb, &k) in g_act.iter_mut().zip(&active) {
                        *gb -= delta * col[k];
                    }
                    max_change = max_change.max(delta.abs());
                }
            }
            state.sweeps += 1;
            record(&mut state, beta);
            let scale = beta.iter().fold(1.0_f64, |a, b| a.max(b.abs()));
            if max_change <= tol * scale || state.sweeps >= opts.max_sweeps {
                break;
            }
        }
        if state.sweeps >= opts.max_sweeps {
            return state;
        }
    }
}

/// Largest active set for which the direct solve is attempted.
const DIRECT_MAX: usize = 500;

/// Active-set step: minimise the smooth part of the objective on the
/// current support and sign pattern. If the minimiser flips a sign, move
/// toward it until the first coefficient reaches zero, drop that
/// coefficient and repeat. Moves that would raise the objective are rejected.
/// Returns whether `beta` changed.
fn active_set_step(
    sys: &CovSystem<'_>,
    mu: f64,
    beta: &mut [f64],
    active: &[usize],
    cache: &mut FactorCache,
) -> bool {
    let gram = sys.gram.as_ref();
    let mut act: Vec<usize> = active.to_vec();
    let mut changed = false;
    while !act.is_empty() && act.len() <= DIRECT_MAX {
        let rhs: Vec<f64> = act.iter().map(|&j| sys.xty[j] - mu * beta[j].signum()).collect();
        let Some(l) = cache.factor_for(gram, &act) else { break };
        let sol = cholesky_solve(l, &rhs);
        if sol.iter().any(|v| !v.is_finite()) {
            break;
        }
        // Largest step in [0, 1] that keeps every sign.
        let mut step = 1.0_f64;
        let mut blocking = None;
        for (a, &j) in act.iter().enumerate() {
            if sol[a] * beta[j] < 0.0 {
                let t = beta[j] / (beta[j] - sol[a]);
                if t < step {
                    step = t;
                    blocking = Some(a);
                }
            }
        }
        // Objective change along the move; the L1 term is linear because
        // no sign changes before the blocking point.
        let delta: Vec<f64> = act.iter().zip(&sol).map(|(&j, v)| v - beta[j]).collect();
        let mut r_delta = 0.0;
        let mut curvature = 0.0;
        for (a, &i) in act.iter().enumerate() {
            let col = gram.col(i);
            let row_b: f64 = act.iter().map(|&j| col[j] * beta[j]).sum();
            let row_d: f64 = act.iter().zip(&delta).map(|(&j, d)| col[j] * d).sum();
            r_delta += (rhs[a] - row_b) * delta[a];
            curvature += delta[a] * row_d;
        }
        let change = -step * r_delta + 0.5 * step * step * curvature;
        if !(change <= 0.0) {
            break;
        }
        for (a, &j) in act.iter().enumerate() {
            beta[j] += step * delta[a];
        }
        if let Some(a) = blocking {
            beta[act[a]] = 0.0;
        }
        changed = true;
        match blocking {
            Some(a) => {
                act.remove(a);
            }
            None => break,
        }
    }
    changed
}
