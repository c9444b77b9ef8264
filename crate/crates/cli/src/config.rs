//! Flat TOML configuration. Every key mirrors the long flag of the same
//! name with `-` written as `_`; a flag given on the command line
//! overrides the file value, which overrides the built-in default.

use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::Deserialize;

use crate::error::CliError;

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub seed: Option<u64>,
    pub threads: Option<usize>,
    pub out_dir: Option<PathBuf>,
    pub record_runtime: Option<bool>,

    pub design: Option<String>,
    pub model: Option<String>,
    pub n: Option<usize>,
    pub p: Option<usize>,
    pub q: Option<usize>,
    pub s: Option<usize>,
    pub r: Option<usize>,
    pub z_kind: Option<String>,
    pub estimators: Option<Vec<String>>,
    pub replicates: Option<usize>,
    pub scenario: Option<String>,
    pub link: Option<String>,
    pub auc: Option<String>,

    pub y: Option<PathBuf>,
    pub x: Option<PathBuf>,
    pub z: Option<PathBuf>,
    pub estimator: Option<String>,
    pub d: Option<usize>,
    pub slices: Option<usize>,
    pub tuning: Option<String>,
    pub folds: Option<usize>,
    pub cv_rule: Option<String>,
    pub stage_one: Option<String>,

    pub regressor: Option<String>,
    pub repeats: Option<usize>,

    pub subsamples: Option<usize>,
    pub cutoff: Option<f64>,
    pub threshold: Option<f64>,
    pub pfer: Option<f64>,
}

impl FileConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        toml::from_str(&text).map_err(|e| {
            let message = e.message().to_string();
            // serde reports unknown fields as "unknown field `name`, expected ...".
            let key = message
                .split('`')
                .nth(1)
                .filter(|_| message.starts_with("unknown field"))
                .unwrap_or("config")
                .to_string();
            CliError::Config { key, message }
        })
    }
}

/// Flag value, else file value.
pub fn pick<T>(flag: Option<T>, file: &Option<T>) -> Option<T>
where
    T: Clone,
{
    flag.or_else(|| file.clone())
}

pub fn parse_key<T>(key: &str, value: &str) -> Result<T, CliError>
where
    T: FromStr<Err = String>,
{
    value.parse().map_err(|m: String| CliError::config(key, m))
}

pub fn require<T>(key: &str, value: Option<T>) -> Result<T, CliError> {
    value.ok_or_else(|| CliError::config(key, "required but not given"))
}

pub fn positive(key: &str, value: usize) -> Result<usize, CliError> {
    if value == 0 {
        Err(CliError::config(key, "must be at least 1"))
    } else {
        Ok(value)
    }
}

pub fn probability(key: &str, value: f64) -> Result<f64, CliError> {
    if value > 0.0 && value <= 1.0 {
        Ok(value)
    } else {
        Err(CliError::config(key, format!("must lie in (0, 1], got {value}")))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unknown_key_is_named() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.toml");
        std::fs::write(&path, "seed = 3\nbogus = 1\n").unwrap();
        match FileConfig::load(&path) {
            Err(CliError::Config { key, .. }) => assert_eq!(key, "bogus"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn flag_beats_file() {
        assert_eq!(pick(Some(1), &Some(2)), Some(1));
        assert_eq!(pick(None, &Some(2)), Some(2));
        assert_eq!(pick::<u8>(None, &None), None);
    }
}
