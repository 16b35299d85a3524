//! Cluster and trace generation, experiment scenarios, metrics and run logs.

pub mod cluster;
pub mod experiment;
pub mod metrics;
pub mod runlog;
pub mod trace;

use thiserror::Error;

use crate::model::ModelError;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("io error: {0}")]
    Io(String),
    #[error("line {line}: {message}")]
    Parse { line: u64, message: String },
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// Splits `k=v,k=v` into trimmed pairs.
pub(crate) fn parse_kv(text: &str) -> Result<Vec<(String, String)>, HarnessError> {
    text.split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|item| {
            item.split_once('=')
                .map(|(k, v)| (k.trim().to_string(), v.trim().to_string()))
                .ok_or_else(|| HarnessError::Config(format!("expected key=value, got '{item}'")))
        })
        .collect()
}
