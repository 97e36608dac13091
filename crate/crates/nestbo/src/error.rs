//! Crate-wide error type.

use thiserror::Error;

/// Errors produced by the optimization and modeling layers.
#[derive(Debug, Error)]
pub enum Error {
    /// An argument violated a precondition (dimension mismatch, bad index,
    /// out-of-range value).
    #[error("invalid argument: {0}")]
    Argument(String),

    /// A linear-algebra routine failed in a way that indicates an
    /// ill-conditioned or indefinite system.
    #[error("numerical failure: {0}")]
    Numerical(String),

    /// The estimated Hessian is singular at the working tolerance; callers
    /// are expected to fall back to a gradient step or skip the point.
    #[error("singular Hessian: smallest singular value {sigma_min:.3e} below threshold {threshold:.3e}")]
    SingularHessian { sigma_min: f64, threshold: f64 },

    /// Configuration file problems (missing file, parse error, bad values).
    #[error("config error: {0}")]
    Config(String),

    /// I/O failures while reading configs or writing traces.
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn argument(msg: impl Into<String>) -> Self {
        Error::Argument(msg.into())
    }

    pub(crate) fn numerical(msg: impl Into<String>) -> Self {
        Error::Numerical(msg.into())
    }
}
