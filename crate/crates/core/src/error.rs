use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {actual}")]
    Dimension { expected: String, actual: String },

    #[error("degenerate alignment: <x, x0> = 0, optimal phase undefined")]
    DegenerateAlignment,

    #[error("invalid reference: zero norm")]
    InvalidReference,

    #[error("degenerate solution: |A x0| vanishes at Fourier index {index}")]
    DegenerateSolution { index: usize },

    #[error("power iteration did not converge in {iters} iterations (best estimate {estimate})")]
    ToleranceNotReached { estimate: f64, iters: usize },

    #[error("capacity exceeded: {0}")]
    Capacity(String),

    #[error("invalid data: {0}")]
    InvalidData(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("format error at byte {offset}: {message}")]
    Format { offset: usize, message: String },

    #[error("unsupported format: {0}")]
    UnsupportedFormat(String),

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn dimension(expected: impl ToString, actual: impl ToString) -> Self {
        Error::Dimension {
            expected: expected.to_string(),
            actual: actual.to_string(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
