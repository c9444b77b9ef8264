//! Endogeneity demonstration for one-stage lasso SIR with `X ~ N(0, I₄)`,
//! `β = (1, 1, 0, 0)` and `Cov(X, ε) = s`, `Var(ε) = 1`.

use rayon::prelude::*;
use serde::Serialize;

use crate::lasso::CvRule;
use crate::numkit::{Matrix, SeededRng};
use crate::sir::{lasso_sir, SirOptions, SirTuning};

use super::{mean_sd, projection_error, selection_auc_with, AucOrientation, SimError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Scenario {
    /// `s = (0.5, 0.5, 0, 0)`, proportional to `β`.
    #[serde(rename = "I")]
    Aligned,
    /// `s = (0.5, −0.5, 0, 0)`, same support as `β`.
    #[serde(rename = "II")]
    SameSupport,
    /// `s = (−0.5, −0.5, 0.5, 0.5)`.
    #[serde(rename = "III")]
    Misaligned,
}

impl Scenario {
    pub const ALL: [Scenario; 3] = [Self::Aligned, Self::SameSupport, Self::Misaligned];

    pub fn covariance(self) -> [f64; 4] {
        match self {
            Self::Aligned => [0.5, 0.5, 0.0, 0.0],
            Self::SameSupport => [0.5, -0.5, 0.0, 0.0],
            Self::Misaligned => [-0.5, -0.5, 0.5, 0.5],
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Self::Aligned => "I",
            Self::SameSupport => "II",
            Self::Misaligned => "III",
        }
    }
}

impl std::str::FromStr for Scenario {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_uppercase().as_str() {
            "I" | "1" => Ok(Self::Aligned),
            "II" | "2" => Ok(Self::SameSupport),
            "III" | "3" => Ok(Self::Misaligned),
            other => Err(format!("unknown scenario `{other}` (expected I, II or III)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Link {
    Linear,
    Sine,
}

impl std::str::FromStr for Link {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "linear" => Ok(Self::Linear),
            "sine" | "sin" => Ok(Self::Sine),
            other => Err(format!("unknown link `{other}` (expected linear or sine)")),
        }
    }
}

pub const BETA: [f64; 4] = [1.0, 1.0, 0.0, 0.0];

/// Draws `(y, X)`. The error is built as `ε = sᵀX + √(1 − ‖s‖²)·e`, which
/// has the required covariance even when `‖s‖ = 1` and the joint
/// covariance is singular.
pub fn sample(n: usize, scenario: Scenario, link: Link, rng: &mut SeededRng) -> (Vec<f64>, Matrix) {
    let s = scenario.covariance();
    let resid = (1.0 - s.iter().map(|v| v * v).sum::<f64>()).max(0.0).sqrt();
    let mut x = Matrix::zeros(n, 4);
    let mut y = Vec::with_capacity(n);
    for i in 0..n {
        let row: Vec<f64> = (0..4).map(|_| rng.normal()).collect();
        let e = rng.normal();
        let eps = crate::numkit::dot(&s, &row) + resid * e;
        let index = crate::numkit::dot(&BETA, &row) + eps;
        y.push(match link {
            Link::Linear => index,
            Link::Sine => index.sin(),
        });
        for (j, v) in row.into_iter().enumerate() {
            x[(i, j)] = v;
        }
    }
    (y, x)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AppendixSummary {
    pub scenario: Scenario,
    pub link: Link,
    pub n: usize,
    pub replicates: usize,
    pub mean_error: f64,
    pub sd_error: f64,
    /// AUC with larger scores taken as support.
    pub mean_auc_fixed: f64,
    /// AUC with data-driven orientation.
    pub mean_auc_auto: f64,
    pub failures: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AppendixRecord {
    pub replicate: u64,
    pub error: Option<f64>,
    pub auc_fixed: Option<f64>,
    pub auc_auto: Option<f64>,
    pub failure: Option<String>,
}

#[derive(Debug, Clone)]
pub struct AppendixResult {
    pub summary: AppendixSummary,
    pub records: Vec<AppendixRecord>,
}

/// Lasso SIR (`H = 10`, 10-fold CV) over `replicates` samples.
pub fn run_appendix(
    scenario: Scenario,
    link: Link,
    n: usize,
    replicates: usize,
    seed: u64,
) -> Result<AppendixResult, SimError> {
    if replicates == 0 {
        return Err(SimError::InvalidConfig("replicates must be at least 1".into()));
    }
    let truth = Matrix::column_vector(&BETA);
    let support = [0usize, 1];
    let base = SeededRng::new(seed);
    let results: Vec<Result<(f64, f64, f64), SimError>> = (0..replicates as u64)
        .into_par_iter()
        .map(|i| {
            let stream = base.child(i);
            let mut data_rng = stream.child(0);
            let (y, x) = sample(n, scenario, link, &mut data_rng);
            let opts = SirOptions {
                d: 1,
                tuning: SirTuning::Cv {
                    folds: 10,
                    repeats: 1,
                    seed: stream.child(1).seed(),
                    rule: CvRule::Min,
                },
                ..SirOptions::default()
            };
            let est = lasso_sir(&y, &x, &opts)?;
            let err = projection_error(&est.b_hat, &truth)?;
            let fixed = selection_auc_with(&est.b_hat, &support, AucOrientation::Fixed)?;
            let auto = selection_auc_with(&est.b_hat, &support, AucOrientation::Auto)?;
            Ok((err, fixed, auto))
        })
        .collect();
    let records: Vec<AppendixRecord> = results
        .iter()
        .enumerate()
        .map(|(i, r)| match r {
            Ok((e, f, a)) => AppendixRecord {
                replicate: i as u64,
                error: Some(*e),
                auc_fixed: Some(*f),
                auc_auto: Some(*a),
                failure: None,
            },
            Err(e) => AppendixRecord {
                replicate: i as u64,
                error: None,
                auc_fixed: None,
                auc_auto: None,
                failure: Some(e.to_string()),
            },
        })
        .collect();
    let ok: Vec<(f64, f64, f64)> = results.iter().flatten().copied().collect();
    let errors: Vec<f64> = ok.iter().map(|r| r.0).collect();
    let (mean_error, sd_error) = mean_sd(&errors);
    let mean = |f: fn(&(f64, f64, f64)) -> f64| ok.iter().map(f).sum::<f64>() / ok.len() as f64;
    let summary = AppendixSummary {
        scenario,
        link,
        n,
        replicates,
        mean_error,
        sd_error,
        mean_auc_fixed: mean(|r| r.1),
        mean_auc_auto: mean(|r| r.2),
        failures: replicates - ok.len(),
    };
    Ok(AppendixResult { summary, records })
}
