use serde::Serialize;

use crate::numkit::{mann_whitney_auc, median, norm2, projection_matrix, Matrix};

use super::SimError;

/// `‖P(B̂) − P(B)‖_F`, with pseudo-inverse projections.
pub fn projection_error(b_hat: &Matrix, b_true: &Matrix) -> Result<f64, SimError> {
    if b_hat.rows() != b_true.rows() {
        return Err(SimError::DimensionMismatch(format!(
            "estimate has {} rows, truth has {}",
            b_hat.rows(),
            b_true.rows()
        )));
    }
    let a = projection_matrix(b_hat)?;
    let b = projection_matrix(b_true)?;
    Ok(a.sub(&b).frobenius_norm())
}

/// How the ROC curve is oriented.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum AucOrientation {
    /// Larger scores indicate the support.
    #[default]
    Fixed,
    /// Orientation chosen from the data: when the median score of the
    /// non-support variables exceeds that of the support, the reversed
    /// curve is used and the AUC is `1 − A`.
    Auto,
}

/// Row norms of `b_hat`.
pub fn row_scores(b_hat: &Matrix) -> Vec<f64> {
    (0..b_hat.rows()).map(|i| norm2(&b_hat.row(i))).collect()
}

/// Variable-selection AUC of the row norms of `b_hat` against `support`.
pub fn selection_auc(b_hat: &Matrix, support: &[usize]) -> Result<f64, SimError> {
    selection_auc_with(b_hat, support, AucOrientation::Fixed)
}

pub fn selection_auc_with(
    b_hat: &Matrix,
    support: &[usize],
    orientation: AucOrientation,
) -> Result<f64, SimError> {
    let p = b_hat.rows();
    if let Some(&bad) = support.iter().find(|&&j| j >= p) {
        return Err(SimError::DimensionMismatch(format!(
            "support index {bad} out of range for {p} variables"
        )));
    }
    let scores = row_scores(b_hat);
    let mut labels = vec![false; p];
    for &j in support {
        labels[j] = true;
    }
    let auc = mann_whitney_auc(&scores, &labels)?;
    Ok(match orientation {
        AucOrientation::Fixed => auc,
        AucOrientation::Auto => {
            let cases: Vec<f64> = scores.iter().zip(&labels).filter(|(_, l)| **l).map(|(s, _)| *s).collect();
            let controls: Vec<f64> = scores.iter().zip(&labels).filter(|(_, l)| !**l).map(|(s, _)| *s).collect();
            if median(&controls) > median(&cases) {
                1.0 - auc
            } else {
                auc
            }
        }
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MetricsReport {
    pub replicate: u64,
    pub projection_error: f64,
    pub auc: f64,
    /// Wall-clock seconds spent fitting.
    pub runtime: f64,
}
