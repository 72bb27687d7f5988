use thiserror::Error;

/// Errors raised by the numerical kernels.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// Argument lies outside the mathematical domain (pole, non-positive radius, ...).
    #[error("domain error: {0}")]
    Domain(String),

    /// Caller supplied an argument that violates a documented precondition.
    #[error("invalid argument: {0}")]
    Argument(String),

    /// Result cannot be represented as a finite `f64`.
    #[error("overflow: {0}")]
    Overflow(String),

    /// Adaptive quadrature stopped before meeting its tolerance.
    #[error("quadrature did not converge: estimate {estimate:e} with error bound {abs_error:e}")]
    Quadrature { estimate: f64, abs_error: f64 },

    /// Input has no meaningful answer (all-zero matrix, empty data, ...).
    #[error("degenerate input: {0}")]
    Degenerate(String),
}

pub type Result<T> = std::result::Result<T, Error>;
