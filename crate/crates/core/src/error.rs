use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("length {0} is not a power of two")]
    NotPowerOfTwo(usize),

    #[error("column block [{start}, {end}) out of range for n = {n}")]
    BlockOutOfRange { start: usize, end: usize, n: usize },

    #[error("n = {n} exceeds the dense cap of {cap}")]
    DenseCapExceeded { n: usize, cap: usize },

    #[error("ill-conditioned system (condition estimate {condition:.3e})")]
    IllConditioned { condition: f64 },

    #[error("eigenvalue iteration did not converge after {sweeps} sweeps")]
    NoConvergence { sweeps: usize },

    #[error("cluster {0} is empty")]
    EmptyCluster(usize),

    #[error("enumeration bound exceeded: {0}")]
    EnumerationBound(String),

    #[error("{path}: line {line}, column {column}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        column: usize,
        message: String,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    /// True for failures of the numerical routines rather than of inputs.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::IllConditioned { .. } | Error::NoConvergence { .. }
        )
    }

    /// True for failures while reading or parsing data.
    pub fn is_data(&self) -> bool {
        matches!(self, Error::Parse { .. } | Error::Io(_) | Error::Csv(_))
    }
}
