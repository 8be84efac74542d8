use std::path::PathBuf;

use thiserror::Error;

/// Errors raised anywhere in the library.
#[derive(Debug, Error)]
pub enum Error {
    /// A caller violated a documented precondition.
    #[error("usage error: {0}")]
    Usage(String),

    /// Grid or experiment configuration is invalid.
    #[error("configuration error: {0}")]
    Config(String),

    /// Config text could not be parsed.
    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    /// An iterative solver stopped without meeting its tolerance.
    #[error("{solver} did not converge after {iterations} iterations (residual {residual:.3e})")]
    SolverFailure {
        solver: &'static str,
        iterations: usize,
        residual: f64,
    },

    /// Shooting could not bracket the ground state.
    #[error("shooting bracket failure: {0}")]
    Bracket(String),

    /// The truncated domain does not hold enough of the profile mass.
    #[error("domain too small: only {fraction:.8} of the profile mass lies inside the box")]
    DomainTooSmall { fraction: f64 },

    /// The tangent frame Gram matrix is numerically singular.
    #[error("tangent frame is degenerate (condition number {condition:.3e})")]
    FrameDegenerate { condition: f64 },

    /// The auxiliary fixed-point iteration grew instead of contracting.
    #[error("auxiliary iteration diverged at step {iteration} (residual {residual:.3e}); try a smaller eps")]
    ContractionFailure { iteration: usize, residual: f64 },

    /// Newton refinement of a critical point of the reduced functional failed.
    #[error("critical point refinement failed: {0}")]
    Refinement(String),

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("malformed field file: {0}")]
    Format(String),
}

impl Error {
    pub(crate) fn usage(msg: impl Into<String>) -> Self {
        Error::Usage(msg.into())
    }

    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Process exit code used by the command-line driver.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Usage(_) | Error::Config(_) | Error::Parse { .. } => 2,
            Error::Io { .. } | Error::Format(_) => 2,
            _ => 3,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
