//! Sliced inverse regression: slicing, the kernel `Λ̂ = n⁻¹XᵀDX`,
//! pseudo-responses and the lasso SIR estimator.

use serde::Serialize;
use thiserror::Error;

use crate::lasso::{
    bic_select, cv_select, solve_cov, CovSystem, CvPlan, CvRule, LassoError, LassoFit, LassoOptions,
    PathOptions, TuningReport,
};
use crate::numkit::{sym_eigen, Matrix, NumError, SeededRng, SymEigen};

/// Eigenvalues at or below this are treated as degenerate.
pub const EIGEN_GUARD: f64 = 1e-10;

pub const DEFAULT_SLICES: usize = 10;

#[derive(Debug, Clone, Error)]
pub enum SirError {
    #[error("need at least {needed} observations for {slices} slices, got {n}")]
    TooFewObservations { n: usize, slices: usize, needed: usize },
    #[error("slice {slice} has {size} members; at least 2 are required")]
    SliceTooSmall { slice: usize, size: usize },
    #[error("eigenvalue {value:e} of direction {k} is below the guard")]
    EigenvalueTooSmall { k: usize, value: f64 },
    #[error("requested {requested} directions but only {available} are available")]
    InvalidDimension { requested: usize, available: usize },
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("fixed penalties: expected 1 or {expected} values, got {got}")]
    PenaltyCount { expected: usize, got: usize },
    #[error(transparent)]
    Lasso(#[from] LassoError),
    #[error(transparent)]
    Num(#[from] NumError),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SliceDesign {
    pub slices: usize,
    /// Slice index (0-based) of each observation.
    pub assignment: Vec<usize>,
    pub sizes: Vec<usize>,
    /// Members of each slice in ascending order of `y`.
    pub members: Vec<Vec<usize>>,
}

impl SliceDesign {
    pub fn n(&self) -> usize {
        self.assignment.len()
    }
}

/// Splits observations into `h` contiguous slices of the `y` order
/// statistics. Ties keep the original order; the first `n mod h` slices
/// receive one extra member.
pub fn make_slices(y: &[f64], h: usize) -> Result<SliceDesign, SirError> {
    let n = y.len();
    if h < 2 || n < 2 * h {
        return Err(SirError::TooFewObservations {
            n,
            slices: h,
            needed: 2 * h.max(2),
        });
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| y[a].total_cmp(&y[b]));
    let base = n / h;
    let extra = n % h;
    let sizes: Vec<usize> = (0..h).map(|s| base + usize::from(s < extra)).collect();
    let mut assignment = vec![0; n];
    let mut members = Vec::with_capacity(h);
    let mut start = 0;
    for (s, &c) in sizes.iter().enumerate() {
        let m = order[start..start + c].to_vec();
        for &i in &m {
            assignment[i] = s;
        }
        members.push(m);
        start += c;
    }
    Ok(SliceDesign {
        slices: h,
        assignment,
        sizes,
        members,
    })
}

/// `Dv` for a single vector: `v_i − c_h/(c_h−1)·(v_i − v̄_h)`.
pub fn apply_d(slices: &SliceDesign, v: &[f64]) -> Vec<f64> {
    let mut out = v.to_vec();
    for m in &slices.members {
        let c = m.len() as f64;
        let a = c / (c - 1.0);
        let mean = m.iter().map(|&i| v[i]).sum::<f64>() / c;
        for &i in m {
            out[i] = v[i] - a * (v[i] - mean);
        }
    }
    out
}

/// `DX`, column by column.
pub fn apply_d_matrix(slices: &SliceDesign, x: &Matrix) -> Matrix {
    let cols: Vec<Vec<f64>> = x.columns().map(|c| apply_d(slices, c)).collect();
    Matrix::from_columns(&cols)
}

#[derive(Debug, Clone)]
pub struct SirKernel<'a> {
    pub lambda_hat: Matrix,
    /// Leading eigenpairs (up to `H` of them).
    pub eigen: SymEigen,
    pub design: &'a Matrix,
    pub slices: SliceDesign,
}

/// Builds `Λ̂ = n⁻¹XᵀDX` for a column-centered `x`.
pub fn kernel<'a>(x: &'a Matrix, slices: &SliceDesign) -> Result<SirKernel<'a>, SirError> {
    if x.rows() != slices.n() {
        return Err(SirError::DimensionMismatch(format!(
            "design has {} rows, slicing covers {}",
            x.rows(),
            slices.n()
        )));
    }
    if let Some((s, &c)) = slices.sizes.iter().enumerate().find(|(_, &c)| c < 2) {
        return Err(SirError::SliceTooSmall { slice: s, size: c });
    }
    x.check_finite()?;
    let dx = apply_d_matrix(slices, x);
    let mut lam = x.tr_matmul(&dx);
    let p = lam.rows();
    let inv_n = 1.0 / x.rows() as f64;
    for j in 0..p {
        for i in 0..j {
            let v = 0.5 * (lam[(i, j)] + lam[(j, i)]) * inv_n;
            lam[(i, j)] = v;
            lam[(j, i)] = v;
        }
        lam[(j, j)] *= inv_n;
    }
    let k = slices.slices.min(p);
    let eigen = sym_eigen(&lam, k)?;
    Ok(SirKernel {
        lambda_hat: lam,
        eigen,
        design: x,
        slices: slices.clone(),
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct PseudoResponse {
    /// Direction index, 1-based.
    pub k: usize,
    pub values: Vec<f64>,
    pub eigenvalue: f64,
}

/// `ỹ_k = λ̂_k⁻¹ D X η̂_k` for one direction (`k` is 1-based).
pub fn pseudo_response(kernel: &SirKernel<'_>, k: usize) -> Result<PseudoResponse, SirError> {
    if k == 0 || k > kernel.eigen.len() {
        return Err(SirError::InvalidDimension {
            requested: k,
            available: kernel.eigen.len(),
        });
    }
    let lam = kernel.eigen.values[k - 1];
    if !(lam > EIGEN_GUARD) {
        return Err(SirError::EigenvalueTooSmall { k, value: lam });
    }
    let v = kernel.design.mul_vec(kernel.eigen.vector(k - 1));
    let values = apply_d(&kernel.slices, &v).into_iter().map(|t| t / lam).collect();
    Ok(PseudoResponse {
        k,
        values,
        eigenvalue: lam,
    })
}

pub fn pseudo_responses(kernel: &SirKernel<'_>, d: usize) -> Result<Vec<PseudoResponse>, SirError> {
    if d == 0 || d > kernel.eigen.len() {
        return Err(SirError::InvalidDimension {
            requested: d,
            available: kernel.eigen.len(),
        });
    }
    (1..=d).map(|k| pseudo_response(kernel, k)).collect()
}

#[derive(Debug, Clone, PartialEq)]
pub enum SirTuning {
    /// K-fold cross-validation on the pseudo-responses.
    Cv {
        folds: usize,
        repeats: usize,
        seed: u64,
        rule: CvRule,
    },
    Bic,
    /// One penalty for every direction, or one per direction.
    Fixed(Vec<f64>),
}

impl Default for SirTuning {
    fn default() -> Self {
        SirTuning::Cv {
            folds: 10,
            repeats: 1,
            seed: 0,
            rule: CvRule::OneSe,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SirOptions {
    pub slices: usize,
    pub d: usize,
    pub tuning: SirTuning,
    pub lasso: LassoOptions,
}

impl Default for SirOptions {
    fn default() -> Self {
        Self {
            slices: DEFAULT_SLICES,
            d: 1,
            tuning: SirTuning::default(),
            lasso: LassoOptions::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Stage {
    OneStage,
    TwoStage,
}

#[derive(Debug, Clone)]
pub struct SdrEstimate {
    /// `p × d` direction estimates.
    pub b_hat: Matrix,
    pub eigenvalues: Vec<f64>,
    /// `λ̂_k ‖β̂_k‖₂`.
    pub adjusted_eigenvalues: Vec<f64>,
    /// Rows of `b_hat` with a nonzero entry.
    pub support: Vec<usize>,
    pub stage: Stage,
    pub penalties: Vec<f64>,
    pub fits: Vec<LassoFit>,
    pub tuning: Vec<Option<TuningReport>>,
}

pub fn support_of(b: &Matrix) -> Vec<usize> {
    (0..b.rows())
        .filter(|&i| (0..b.cols()).any(|k| b[(i, k)] != 0.0))
        .collect()
}

/// Per-direction penalty rule used by [`SirFitter::fit_direction`].
#[derive(Debug, Clone, Copy)]
pub enum DirectionTuning<'p> {
    Cv(&'p [CvPlan], CvRule),
    Bic,
    Fixed(f64),
}

/// Shared state for fitting several lasso SIR directions on one design:
/// kernel, eigenpairs and the Gram `XᵀX/n`.
#[derive(Debug, Clone)]
pub struct SirFitter<'a> {
    pub kernel: SirKernel<'a>,
    pub gram: Matrix,
}

impl<'a> SirFitter<'a> {
    /// `x` must already be column-centered.
    pub fn new(y: &[f64], x: &'a Matrix, slices: usize) -> Result<Self, SirError> {
        if y.len() != x.rows() {
            return Err(SirError::DimensionMismatch(format!(
                "response has {} entries, design has {} rows",
                y.len(),
                x.rows()
            )));
        }
        let design = make_slices(y, slices)?;
        let kernel = kernel(x, &design)?;
        let mut gram = x.gram();
        gram.scale_in_place(1.0 / x.rows() as f64);
        Ok(Self { kernel, gram })
    }

    pub fn design(&self) -> &Matrix {
        self.kernel.design
    }

    pub fn n(&self) -> usize {
        self.kernel.design.rows()
    }

    /// Lasso of the `k`-th pseudo-response on the design.
    pub fn fit_direction(
        &self,
        k: usize,
        tuning: DirectionTuning<'_>,
        opts: &LassoOptions,
    ) -> Result<(PseudoResponse, LassoFit, Option<TuningReport>), SirError> {
        let pr = pseudo_response(&self.kernel, k)?;
        let x = self.kernel.design;
        let path_opts = PathOptions::for_tuning(self.n());
        let (fit, report) = match tuning {
            DirectionTuning::Fixed(mu) => {
                let sys = CovSystem::with_gram(&self.gram, x, &pr.values);
                (solve_cov(&sys, mu, None, opts)?, None)
            }
            DirectionTuning::Bic => {
                let sys = CovSystem::with_gram(&self.gram, x, &pr.values);
                let rep = bic_select(&sys, None, opts, &path_opts)?;
                (rep.fit.clone(), Some(rep))
            }
            DirectionTuning::Cv(plans, rule) => {
                let rep = cv_select(x, &self.gram, plans, &pr.values, None, rule, opts, &path_opts)?;
                (rep.fit.clone(), Some(rep))
            }
        };
        Ok((pr, fit, report))
    }

    /// Fits directions `1..=d` and assembles the estimate.
    pub fn estimate(&self, d: usize, tuning: &SirTuning, opts: &LassoOptions, stage: Stage) -> Result<SdrEstimate, SirError> {
        let available = self.kernel.eigen.len();
        if d == 0 || d > available {
            return Err(SirError::InvalidDimension {
                requested: d,
                available,
            });
        }
        let plans = match tuning {
            SirTuning::Cv {
                folds, repeats, seed, ..
            } => {
                let mut rng = SeededRng::new(*seed);
                (0..(*repeats).max(1))
                    .map(|_| CvPlan::random(self.design(), *folds, &mut rng))
                    .collect::<Result<Vec<_>, _>>()?
            }
            SirTuning::Fixed(v) if v.len() != 1 && v.len() != d => {
                return Err(SirError::PenaltyCount {
                    expected: d,
                    got: v.len(),
                })
            }
            _ => Vec::new(),
        };
        let p = self.design().cols();
        let mut b_hat = Matrix::zeros(p, d);
        let mut eigenvalues = Vec::with_capacity(d);
        let mut adjusted = Vec::with_capacity(d);
        let mut penalties = Vec::with_capacity(d);
        let mut fits = Vec::with_capacity(d);
        let mut reports = Vec::with_capacity(d);
        for k in 1..=d {
            let rule = match tuning {
                SirTuning::Cv { rule, .. } => DirectionTuning::Cv(&plans, *rule),
                SirTuning::Bic => DirectionTuning::Bic,
                SirTuning::Fixed(v) => DirectionTuning::Fixed(if v.len() == 1 { v[0] } else { v[k - 1] }),
            };
            let (pr, fit, rep) = self.fit_direction(k, rule, opts)?;
            b_hat.col_mut(k - 1).copy_from_slice(&fit.coefficients);
            eigenvalues.push(pr.eigenvalue);
            adjusted.push(pr.eigenvalue * crate::numkit::norm2(&fit.coefficients));
            penalties.push(fit.penalty);
            fits.push(fit);
            reports.push(rep);
        }
        Ok(SdrEstimate {
            support: support_of(&b_hat),
            b_hat,
            eigenvalues,
            adjusted_eigenvalues: adjusted,
            stage,
            penalties,
            fits,
            tuning: reports,
        })
    }
}

/// One-stage lasso SIR of `y` on `x` (centered internally).
pub fn lasso_sir(y: &[f64], x: &Matrix, opts: &SirOptions) -> Result<SdrEstimate, SirError> {
    let xc = x.centered();
    let fitter = SirFitter::new(y, &xc, opts.slices)?;
    fitter.estimate(opts.d, &opts.tuning, &opts.lasso, Stage::OneStage)
}
