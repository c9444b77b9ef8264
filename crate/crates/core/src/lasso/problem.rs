use crate::numkit::{mean, Matrix};

use super::solver::{solve_cov, CovSystem, LassoFit, LassoOptions};
use super::LassoError;

/// Column means (and the response mean) must be this close to zero.
pub const CENTERING_TOL: f64 = 1e-8;

/// Centered least-squares data plus an ℓ1 penalty.
#[derive(Debug, Clone, Copy)]
pub struct LassoProblem<'a> {
    design: &'a Matrix,
    response: &'a [f64],
    penalty: f64,
}

impl<'a> LassoProblem<'a> {
    pub fn new(design: &'a Matrix, response: &'a [f64], penalty: f64) -> Result<Self, LassoError> {
        check_centered(design, response)?;
        if !(penalty >= 0.0) || !penalty.is_finite() {
            return Err(LassoError::InvalidPenalty(penalty));
        }
        Ok(Self {
            design,
            response,
            penalty,
        })
    }

    pub fn design(&self) -> &Matrix {
        self.design
    }

    pub fn response(&self) -> &[f64] {
        self.response
    }

    pub fn penalty(&self) -> f64 {
        self.penalty
    }

    pub fn system(&self) -> CovSystem<'static> {
        CovSystem::from_data(self.design, self.response)
    }
}

pub(crate) fn check_centered(design: &Matrix, response: &[f64]) -> Result<(), LassoError> {
    if design.rows() != response.len() {
        return Err(LassoError::DimensionMismatch {
            detail: format!(
                "design has {} rows, response has {} entries",
                design.rows(),
                response.len()
            ),
        });
    }
    if !design.is_finite() || response.iter().any(|v| !v.is_finite()) {
        return Err(LassoError::NonFinite);
    }
    for (j, col) in design.columns().enumerate() {
        let scale = col.iter().fold(1.0_f64, |m, v| m.max(v.abs()));
        let m = mean(col);
        if m.abs() > CENTERING_TOL * scale {
            return Err(LassoError::NotCentered {
                what: format!("design column {j}"),
                mean: m,
            });
        }
    }
    let scale = response.iter().fold(1.0_f64, |m, v| m.max(v.abs()));
    let m = mean(response);
    if m.abs() > CENTERING_TOL * scale {
        return Err(LassoError::NotCentered {
            what: "response".into(),
            mean: m,
        });
    }
    Ok(())
}

/// Minimises `(1/2n)‖y - Xβ‖² + μ‖β‖₁` by coordinate descent.
pub fn solve(
    problem: &LassoProblem<'_>,
    warm: Option<&[f64]>,
    opts: &LassoOptions,
) -> Result<LassoFit, LassoError> {
    solve_cov(&problem.system(), problem.penalty, warm, opts)
}
