use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("node index {index} out of range for graph with {num_nodes} nodes")]
    IndexOutOfRange { index: usize, num_nodes: usize },

    #[error("shape mismatch in {op}: {lhs:?} vs {rhs:?}")]
    ShapeMismatch {
        op: &'static str,
        lhs: (usize, usize),
        rhs: (usize, usize),
    },

    #[error("non-finite value produced by {0}")]
    NonFinite(&'static str),

    #[error("log of non-positive value {0}")]
    LogDomain(f64),

    #[error("empty tensor passed to {0}")]
    EmptyTensor(&'static str),

    #[error("backward requires a 1x1 loss, got {rows}x{cols}")]
    NotScalar { rows: usize, cols: usize },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("infeasible request: {0}")]
    Infeasible(String),

    #[error("graph has no edges; {0} is undefined")]
    Edgeless(&'static str),

    #[error("empty {0}")]
    EmptySet(&'static str),

    #[error("mutual information is unbounded at mse = {0}")]
    UnboundedInformation(f64),

    #[error("invalid config: {0}")]
    Config(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn parse(path: impl Into<PathBuf>, line: usize, message: impl Into<String>) -> Self {
        Error::Parse {
            path: path.into(),
            line,
            message: message.into(),
        }
    }

    /// True for errors caused by bad user-supplied arguments or config, as
    /// opposed to data or runtime failures.
    pub fn is_validation(&self) -> bool {
        matches!(self, Error::InvalidArgument(_) | Error::Config(_))
    }
}
