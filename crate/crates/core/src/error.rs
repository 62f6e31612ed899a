use std::path::PathBuf;

use thiserror::Error;

/// Errors raised across the toolkit.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension error: {0}")]
    Dimension(String),

    #[error("shape error: {0}")]
    Shape(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("simulation diverged at step {step}: {detail}")]
    Diverged { step: usize, detail: String },

    #[error("non-finite value in {0}")]
    NonFinite(String),

    #[error("reduction error: requested rank {requested} exceeds achievable rank {achievable}")]
    Rank { requested: usize, achievable: usize },

    #[error("optimization problem error: {0}")]
    Problem(String),

    #[error("solver failed: {0}")]
    Solver(String),

    #[error("parse error in {path}{}: {detail}", location(.line))]
    Parse {
        path: PathBuf,
        line: Option<u64>,
        detail: String,
    },

    #[error("checkpoint schema mismatch: {0}")]
    Schema(String),

    #[error("training diverged at epoch {epoch}: {detail}")]
    TrainingDiverged { epoch: usize, detail: String },

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

fn location(line: &Option<u64>) -> String {
    match line {
        Some(l) => format!(" (line {l})"),
        None => String::new(),
    }
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn parse(path: impl Into<PathBuf>, line: Option<u64>, detail: impl Into<String>) -> Self {
        Error::Parse {
            path: path.into(),
            line,
            detail: detail.into(),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
