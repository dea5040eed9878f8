//! Crate-wide error type.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, Error)]
pub enum Error {
    /// An argument violated a documented precondition.
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// Vector or matrix dimensions do not line up.
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    /// The iterative minimizer ran out of budget before reaching tolerance.
    #[error("oracle did not converge within {iterations} iterations (gradient norm {residual:.3e}, tolerance {tolerance:.3e})")]
    OracleDidNotConverge {
        iterations: usize,
        residual: f64,
        tolerance: f64,
    },

    /// A closed-form bound was evaluated outside its applicability region.
    #[error("bound not applicable: {0}")]
    BoundNotApplicable(String),

    /// A trajectory produced a non-finite iterate, which indicates a
    /// configuration error (e.g. a divergent constant step) rather than an
    /// ordinary heavy-tail excursion.
    #[error("non-finite iterate in trial {trial} at round {round}")]
    NonFiniteIterate { trial: u64, round: usize },
}

impl Error {
    pub fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    pub fn dim(msg: impl Into<String>) -> Self {
        Error::DimensionMismatch(msg.into())
    }
}
