//! Error type shared by all modules.

use thiserror::Error;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum PiiError {
    /// Argument outside the supported domain of a kernel.
    #[error("domain error in {what}: {detail}")]
    Domain { what: &'static str, detail: String },

    /// log Gamma evaluated at a nonpositive integer.
    #[error("Gamma pole at z = {0}")]
    GammaPole(String),

    /// Parameters violate the family invariants of `PIIParams`.
    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    /// (alpha, k) = (0, 0): the solution is identically zero and the
    /// connection data has no meaningful phase.
    #[error("degenerate parameters: (alpha, k) = (0, 0)")]
    DegenerateParams,

    /// |k| at the Hastings-McLeod boundary: d diverges.
    #[error("boundary parameters: {0}")]
    BoundaryParams(String),

    /// Lax matrix A(lambda) evaluated at lambda = 0.
    #[error("singular lambda = 0 in Lax matrix")]
    SingularLambda,

    /// The step controller could not meet the tolerance above the step floor.
    #[error("tolerance failure at x = {x}")]
    ToleranceFailure { x: f64 },

    /// Oscillation fit could not be performed.
    #[error("fit failure: {0}")]
    FitFailure(String),
}

pub type Result<T> = std::result::Result<T, PiiError>;
