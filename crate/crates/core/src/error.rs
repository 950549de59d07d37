use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}:{line}: {message}")]
    Parse { path: PathBuf, line: u64, message: String },

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("empty matrix: no ratings left after filtering items with fewer than {min_rpi} ratings")]
    EmptyMatrix { min_rpi: usize },

    #[error("degenerate matrix: every item has a zero-norm centered column")]
    DegenerateMatrix,

    #[error("invalid ratings matrix: {0}")]
    InvalidMatrix(String),

    #[error("{name} = {value} is outside its domain {domain}")]
    Domain {
        name: &'static str,
        value: f64,
        domain: &'static str,
    },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("feedback series diverges: alpha * sigma_max^2 = {product} >= 1")]
    Divergence { product: f64 },

    #[error("truncated svd did not converge after {steps} Lanczos steps (best relative residual {best_residual:e})")]
    NotConverged { steps: usize, best_residual: f64 },

    #[error("roc curve needs both positive and negative labels (got {positives} positives, {negatives} negatives)")]
    SingleClass { positives: usize, negatives: usize },

    #[error("zero variance on the {0} axis")]
    ZeroVariance(&'static str),

    #[error("empty input: {0}")]
    EmptyInput(&'static str),

    #[error("decomposition cache: {0}")]
    Cache(String),
}

/// Coarse classification used by front ends to pick an exit status.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    Usage,
    Data,
    Numerical,
}

impl Error {
    pub fn kind(&self) -> ErrorKind {
        match self {
            Error::Domain { .. } | Error::InvalidArgument(_) => ErrorKind::Usage,
            Error::Divergence { .. } | Error::NotConverged { .. } | Error::ZeroVariance(_) => ErrorKind::Numerical,
            _ => ErrorKind::Data,
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
