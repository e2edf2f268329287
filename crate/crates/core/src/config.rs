//! Experiment config files: `key = value` lines, `#` comment lines, keys
//! named exactly after [`ExperimentConfig`] fields. Missing keys fall back
//! to the defaults; unknown keys and malformed values are rejected with the
//! offending line number; cross-field constraints are checked after parsing.

use crate::train::{ConfigIssue, ExperimentConfig};

use std::path::{Path, PathBuf};

use thiserror::Error;

/// Errors from reading or validating a config file.
#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("{path}:{line}: expected `key = value`, got {text:?}")]
    Syntax {
        path: String,
        line: usize,
        text: String,
    },
    #[error("{path}:{line}: unknown key `{key}`")]
    UnknownKey {
        path: String,
        line: usize,
        key: String,
    },
    #[error("{path}:{line}: bad value {value:?} for `{key}`")]
    BadValue {
        path: String,
        line: usize,
        key: String,
        value: String,
    },
    #[error("{path}: {source}")]
    Constraint { path: String, source: ConfigIssue },
}

/// Parses a config file, applying defaults for absent keys and validating
/// the result. A later line overrides an earlier one for the same key.
pub fn parse_config(path: &Path) -> Result<ExperimentConfig, ConfigError> {
    let name = path.display().to_string();
    let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
        path: name.clone(),
        source,
    })?;

    let mut cfg = ExperimentConfig::default();
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let trimmed = raw.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let Some((key, value)) = trimmed.split_once('=') else {
            return Err(ConfigError::Syntax {
                path: name,
                line,
                text: trimmed.to_string(),
            });
        };
        let key = key.trim();
        let value = value.trim();
        let bad = || ConfigError::BadValue {
            path: name.clone(),
            line,
            key: key.to_string(),
            value: value.to_string(),
        };
        match key {
            "seed" => cfg.seed = value.parse().map_err(|_| bad())?,
            "train_n_per_class" => cfg.train_n_per_class = value.parse().map_err(|_| bad())?,
            "eval_n_per_class" => cfg.eval_n_per_class = value.parse().map_err(|_| bad())?,
            "epochs" => cfg.epochs = value.parse().map_err(|_| bad())?,
            "batch_size" => cfg.batch_size = value.parse().map_err(|_| bad())?,
            "lr_base" => cfg.lr_base = value.parse().map_err(|_| bad())?,
            "lr_decay" => cfg.lr_decay = value.parse().map_err(|_| bad())?,
            "lr_horizon" => cfg.lr_horizon = value.parse().map_err(|_| bad())?,
            "hidden_sizes" => {
                let sizes: Result<Vec<usize>, _> =
                    value.split(',').map(|tok| tok.trim().parse()).collect();
                match sizes {
                    Ok(s) if !s.is_empty() => cfg.hidden_sizes = s,
                    _ => return Err(bad()),
                }
            }
            "checkpoint_path" => {
                if value.is_empty() {
                    return Err(bad());
                }
                cfg.checkpoint_path = PathBuf::from(value);
            }
            "resume" => {
                cfg.resume = match value {
                    "true" => true,
                    "false" => false,
                    _ => return Err(bad()),
                }
            }
            _ => {
                return Err(ConfigError::UnknownKey {
                    path: name,
                    line,
                    key: key.to_string(),
                })
            }
        }
    }

    cfg.validate()
        .map_err(|source| ConfigError::Constraint { path: name, source })?;
    Ok(cfg)
}
