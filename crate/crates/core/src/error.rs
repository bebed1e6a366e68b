use thiserror::Error;

use crate::nn::Checkpoint;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("singular matrix: pivot {pivot:e} in column {column}")]
    SingularMatrix { column: usize, pivot: f64 },

    #[error("no convergence after {iterations} iterations (residual norm {residual:e})")]
    NoConvergence { iterations: usize, residual: f64 },

    #[error("matrix is not symmetric (asymmetry {asymmetry:e})")]
    NotSymmetric { asymmetry: f64 },

    #[error("matrix is not positive definite (smallest eigenvalue {min_eigenvalue:e})")]
    NotPositiveDefinite { min_eigenvalue: f64 },

    #[error("matrix is not Hurwitz")]
    NotHurwitz,

    #[error("index-1 violation: singular stage Jacobian")]
    IndexViolation,

    #[error("solver failed at t = {time}: {source}")]
    SolverFailure {
        time: f64,
        #[source]
        source: Box<Error>,
    },

    #[error("too few trajectory points: requested {requested} pairs, {available} available")]
    TooFewPoints { requested: usize, available: usize },

    #[error("non-finite loss at epoch {epoch}")]
    NonFiniteLoss {
        epoch: usize,
        last_finite: Box<Checkpoint>,
    },

    #[error("time grids do not match")]
    GridMismatch,

    #[error("empty sample cloud")]
    EmptyCloud,

    #[error("unknown tableau '{0}'")]
    UnknownTableau(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn dims(msg: impl Into<String>) -> Self {
        Error::DimensionMismatch(msg.into())
    }

    /// Unwraps `SolverFailure` layers down to the underlying cause.
    pub fn root(&self) -> &Error {
        match self {
            Error::SolverFailure { source, .. } => source.root(),
            other => other,
        }
    }
}

pub(crate) fn check_len(what: &str, got: usize, want: usize) -> Result<()> {
    if got == want {
        Ok(())
    } else {
        Err(Error::dims(format!("{what}: expected length {want}, got {got}")))
    }
}
