use std::path::PathBuf;

use serde_json::json;
use slsir::lasso::LassoError;
use slsir::numkit::NumError;
use slsir::simlab::SimError;
use slsir::sir::SirError;
use slsir::twostage::TwoStageError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("invalid value for `{key}`: {message}")]
    Config { key: String, message: String },
    #[error("{0}")]
    Data(String),
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error("cannot access {}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl CliError {
    pub fn config(key: &str, message: impl Into<String>) -> Self {
        CliError::Config {
            key: key.to_string(),
            message: message.into(),
        }
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.into(),
            source,
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config { .. } => 2,
            CliError::Data(_) | CliError::Io { .. } => 3,
            CliError::Numerical(_) => 4,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            CliError::Config { .. } => "config",
            CliError::Data(_) => "data",
            CliError::Io { .. } => "io",
            CliError::Numerical(_) => "numerical",
        }
    }

    /// Machine-readable record written to stderr on failure.
    pub fn record(&self) -> serde_json::Value {
        let mut rec = json!({
            "error": self.kind(),
            "code": self.exit_code(),
            "message": self.to_string(),
        });
        if let CliError::Config { key, .. } = self {
            rec["key"] = json!(key);
        }
        rec
    }
}

impl From<NumError> for CliError {
    fn from(e: NumError) -> Self {
        match e {
            NumError::DimensionMismatch { .. } => CliError::Data(e.to_string()),
            _ => CliError::Numerical(e.to_string()),
        }
    }
}

impl From<LassoError> for CliError {
    fn from(e: LassoError) -> Self {
        match e {
            LassoError::NonFinite | LassoError::MaxIterations { .. } => {
                CliError::Numerical(e.to_string())
            }
            LassoError::InvalidPenalty(_) => CliError::config("penalty", e.to_string()),
            LassoError::InvalidGrid(_) | LassoError::DegenerateFolds { .. } => {
                CliError::config("folds", e.to_string())
            }
            LassoError::NotCentered { .. } | LassoError::DimensionMismatch { .. } => {
                CliError::Data(e.to_string())
            }
        }
    }
}

impl From<SirError> for CliError {
    fn from(e: SirError) -> Self {
        match e {
            SirError::Lasso(inner) => inner.into(),
            SirError::Num(inner) => inner.into(),
            SirError::InvalidDimension { .. } => CliError::config("d", e.to_string()),
            SirError::PenaltyCount { .. } => CliError::config("penalty", e.to_string()),
            SirError::EigenvalueTooSmall { .. } => CliError::Numerical(e.to_string()),
            SirError::TooFewObservations { .. }
            | SirError::SliceTooSmall { .. }
            | SirError::DimensionMismatch(_) => CliError::Data(e.to_string()),
        }
    }
}

impl From<TwoStageError> for CliError {
    fn from(e: TwoStageError) -> Self {
        match e {
            TwoStageError::Sir(inner) => inner.into(),
            TwoStageError::Lasso(inner) => inner.into(),
            TwoStageError::Num(inner) => inner.into(),
            TwoStageError::StageOne { column, source } => match CliError::from(source) {
                CliError::Numerical(m) => CliError::Numerical(format!("stage one, column {column}: {m}")),
                other => other,
            },
            TwoStageError::PenaltyCount { .. } => CliError::config("penalty", e.to_string()),
            TwoStageError::AllSubsamplesFailed => CliError::Numerical(e.to_string()),
            TwoStageError::DimensionMismatch(_) | TwoStageError::TooFewObservations { .. } => {
                CliError::Data(e.to_string())
            }
        }
    }
}

impl From<SimError> for CliError {
    fn from(e: SimError) -> Self {
        match e {
            SimError::InvalidConfig(msg) => {
                // Validation messages lead with the offending key.
                let key = msg.split_whitespace().next().unwrap_or("config").to_string();
                CliError::Config { key, message: msg }
            }
            SimError::Num(inner) => inner.into(),
            SimError::Lasso(inner) => inner.into(),
            SimError::Sir(inner) => inner.into(),
            SimError::TwoStage(inner) => inner.into(),
            SimError::DimensionMismatch(_) => CliError::Data(e.to_string()),
            SimError::CannotAchievePD { .. } | SimError::NonFinite => CliError::Numerical(e.to_string()),
        }
    }
}
