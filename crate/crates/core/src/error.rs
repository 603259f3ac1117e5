use thiserror::Error;

use crate::conic::SolveStatus;

#[derive(Debug, Error)]
pub enum Error {
    #[error("matrix is not Hermitian (max entry deviation {deviation:.3e})")]
    NotHermitian { deviation: f64 },

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("invalid exponent {0:?}: expected a value in [1, inf]")]
    InvalidExponent(String),

    #[error("map is not completely positive (Choi margin {margin:.6e})")]
    NotCompletelyPositive { margin: f64 },

    #[error("subspace basis is ill-conditioned (Gram condition number {cond:.3e})")]
    IllConditionedBasis { cond: f64 },

    #[error("map does not send diagonal matrices to diagonal matrices")]
    NotDiagonalPreserving,

    #[error("conic solve failed with status {0:?}")]
    Solver(SolveStatus),

    #[error("{location}: {message}")]
    Format { location: String, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn dim(msg: impl Into<String>) -> Self {
        Error::Dimension(msg.into())
    }

    pub(crate) fn format(location: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Format {
            location: location.into(),
            message: message.into(),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
