use std::path::PathBuf;

use thiserror::Error;

/// Errors produced by the library and the verification runner.
#[derive(Debug, Error)]
pub enum Error {
    #[error("Chern level must be a nonzero integer")]
    ZeroLevel,

    #[error("quadrature order {quad} is below the floor {floor} for working degree {degree}")]
    QuadratureTooLow {
        degree: usize,
        quad: usize,
        floor: usize,
    },

    #[error("parse error on line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("duplicate Fourier mode ({m}, {n}) on line {line}")]
    DuplicateMode { m: i64, n: i64, line: usize },

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("Chern level mismatch: {left} vs {right}")]
    LevelMismatch { left: i64, right: i64 },

    #[error("interior margin {margin} must satisfy 0 < margin < {limit}")]
    InvalidMargin { margin: usize, limit: usize },

    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("section is under-resolved: {tail_fraction:.3e} of its energy sits in the top Hermite degrees")]
    UnderResolved { tail_fraction: f64 },

    #[error("operator set is empty")]
    EmptySet,

    #[error("linear algebra failure: {0}")]
    Linalg(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: {source}")]
    Json {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
