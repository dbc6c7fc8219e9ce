use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("{path}:{line}: value {value} outside [{min}, {max}]")]
    Range {
        path: PathBuf,
        line: usize,
        value: f64,
        min: f64,
        max: f64,
    },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("empty input: {0}")]
    Empty(String),

    #[error("similarity undefined: {0}")]
    UndefinedSimilarity(&'static str),

    #[error("node sets differ: only in left {only_left:?}, only in right {only_right:?}")]
    NodeSetMismatch {
        only_left: Vec<String>,
        only_right: Vec<String>,
    },

    #[error("non-finite value at node {node}: {message}")]
    Numeric { node: String, message: String },

    #[error("point {point:?} outside the domain of {name}")]
    Domain { name: &'static str, point: Vec<f64> },

    #[error("iteration did not converge after {iterations} steps (residual {residual:e})")]
    NotConverged { iterations: usize, residual: f64 },

    #[error("refused: {0}")]
    Refused(String),

    #[error("stage `{stage}` failed: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

/// Coarse failure class, used by the CLI to pick an exit code.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorClass {
    Input,
    Numeric,
    Internal,
}

impl Error {
    pub fn class(&self) -> ErrorClass {
        match self {
            Error::Parse { .. }
            | Error::Range { .. }
            | Error::Config(_)
            | Error::Empty(_)
            | Error::NodeSetMismatch { .. }
            | Error::Domain { .. }
            | Error::Io(_) => ErrorClass::Input,
            Error::Numeric { .. } | Error::NotConverged { .. } | Error::UndefinedSimilarity(_) => {
                ErrorClass::Numeric
            }
            Error::Stage { source, .. } => source.class(),
            Error::Refused(_) | Error::Json(_) => ErrorClass::Internal,
        }
    }

    pub fn in_stage(self, stage: &'static str) -> Error {
        Error::Stage {
            stage,
            source: Box::new(self),
        }
    }
}
