//! Error types shared across the crate.

use thiserror::Error;

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// A constructor was handed an invalid parameter value.
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    /// A derivative of higher order than the kernel (or function) supports
    /// was requested.
    #[error("unsupported derivative order: requested {requested}, smoothness budget {budget} ({context})")]
    UnsupportedOrder {
        requested: String,
        budget: String,
        context: &'static str,
    },

    /// Vector/matrix dimensions do not line up.
    #[error("dimension mismatch in {context}: expected {expected}, got {got}")]
    DimensionMismatch {
        context: &'static str,
        expected: usize,
        got: usize,
    },

    /// A point or region lies outside the problem domain.
    #[error("domain error: {0}")]
    Domain(String),

    /// The trial Gram matrix inside a projection is singular or nearly so.
    #[error("ill-conditioned trial basis: {0}")]
    IllConditionedBasis(String),

    /// A weighted-residual system matrix is singular or nearly so.
    #[error("singular system: {0}")]
    SingularSystem(String),

    /// Numerical failure (e.g. a Gram matrix that cannot be factorized even
    /// after jitter escalation).
    #[error("numerical failure: {0}")]
    Numerical(String),

    /// A caller violated an API contract.
    #[error("contract violation: {0}")]
    Contract(String),
}
