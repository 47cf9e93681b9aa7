//! Crate-wide error type.

use thiserror::Error;

/// Errors produced by basis construction, sampling, coherence estimation,
/// regression, and the experiment drivers.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// The input dimension `d` must be at least 1.
    #[error("input dimension must be at least 1")]
    ZeroDimension,

    /// binomial(p+d, d) does not fit in the platform integer range.
    #[error("basis size binomial({p}+{d}, {d}) overflows the platform integer range")]
    BasisSizeOverflow { d: usize, p: usize },

    /// A point had the wrong number of coordinates.
    #[error("point has {got} coordinates but the basis dimension is {expected}")]
    DimensionMismatch { expected: usize, got: usize },

    /// A coordinate fell outside the Legendre domain.
    #[error("coordinate {index} is {value}, outside the Legendre domain [-1, 1]")]
    OutsideDomain { index: usize, value: f64 },

    /// A point fell outside the sampling strategy's support.
    #[error("point is outside the sampling support: {reason}")]
    OutsideSupport { reason: String },

    /// An input that must be finite was NaN or infinite.
    #[error("non-finite {name}: {value}")]
    NonFinite { name: &'static str, value: f64 },

    /// A parameter failed its documented precondition.
    #[error("invalid {name}: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    /// Two sequences that must have equal lengths did not.
    #[error("{name} has length {got}, expected {expected}")]
    LengthMismatch {
        name: &'static str,
        expected: usize,
        got: usize,
    },

    /// The tridiagonal eigensolver behind the quadrature rules did not
    /// converge within the sweep budget.
    #[error("quadrature eigensolver did not converge for eigenvalue {index} after {sweeps} sweeps")]
    EigenNoConvergence { index: usize, sweeps: usize },

    /// A tensor quadrature request exceeded the point budget.
    #[error("tensor rule needs {points} points, above the budget of {budget}")]
    QuadratureBudget { points: u128, budget: u128 },

    /// A norm that must be positive was zero.
    #[error("{name} has zero norm")]
    ZeroNorm { name: &'static str },

    /// The requested success probability is not attainable under the
    /// truncated-coherence sample-size formula.
    #[error("success probability {rho} is infeasible under the truncated form; it must be below 1 - 1/P = {limit}")]
    InfeasibleRho { rho: f64, limit: f64 },

    /// The least-squares backend failed.
    #[error("least-squares solve failed: {reason}")]
    SolveFailed { reason: String },

    /// An ODE trajectory produced a non-finite state.
    #[error("ODE integration produced a non-finite state at t = {t}")]
    IntegrationFailed { t: f64 },

    /// A grid that must be strictly ascending was not.
    #[error("{name} must be strictly ascending")]
    GridNotAscending { name: &'static str },

    /// A grid or list that must be nonempty was empty.
    #[error("{name} must not be empty")]
    EmptyGrid { name: &'static str },
}

/// Convenience alias used throughout the crate.
pub type Result<T> = std::result::Result<T, Error>;
