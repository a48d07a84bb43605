//! Error taxonomy shared across the library.

/// Convenience alias used throughout the crate.
pub type Result<T> = std::result::Result<T, Error>;

/// Errors produced by the library.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    /// The state transformation to output-as-state form is not invertible
    /// (the transformed input gain would be zero), or a supplied linear map
    /// that must be inverted is singular.
    #[error("singular transformation: {0}")]
    SingularTransform(String),

    /// A system with direct feedthrough (`D ≠ 0`) was passed where an
    /// algebraic-loop-free system is required.
    #[error("system has direct feedthrough (D != 0)")]
    FeedthroughPresent,

    /// Operand dimensions are inconsistent.
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    /// A matrix that must be positive definite is not.
    #[error("matrix is not positive definite: {0}")]
    NotPositiveDefinite(String),

    /// The weighted-projection inner solver hit its iteration cap without
    /// meeting its tolerance.
    #[error("weighted-projection inner solver did not converge within the iteration cap")]
    InnerSolverDiverged,

    /// A residual was requested at a point that does not lie in the set.
    #[error("point lies outside the set (projection distance {distance:.3e})")]
    PointOutsideSet {
        /// Euclidean distance from the point to the set.
        distance: f64,
    },

    /// Sector constants must satisfy `0 < m ≤ L` (strictly `m < L` where an
    /// algorithm requires it).
    #[error("invalid sector constants: {0}")]
    InvalidSector(String),

    /// A simulation produced a NaN or infinite iterate.
    #[error("non-finite iterate at step {step}")]
    NonFiniteIterate {
        /// Step index at which the first non-finite value appeared.
        step: usize,
    },

    /// Too few valid data points for a rate fit.
    #[error("insufficient data for rate estimation: {0}")]
    InsufficientData(String),

    /// An iterative solve hit its iteration cap.
    #[error("iteration cap {cap} exceeded")]
    MaxIterationsExceeded {
        /// The cap that was exceeded.
        cap: usize,
    },

    /// A multiplier coefficient that must be nonnegative is negative.
    #[error("negative multiplier coefficient: lambda[{index}] = {value:.3e}")]
    NegativeLambda {
        /// Index of the offending coefficient.
        index: usize,
        /// Its value.
        value: f64,
    },

    /// Rate bisection found no certificate even at the most permissive rate.
    #[error("no certificate exists for this system/multiplier pair (infeasible at rho = 1 - 1e-9)")]
    NoCertificate,

    /// A certificate that fails deterministic verification was passed where a
    /// verified one is required.
    #[error("certificate fails verification: {0}")]
    UnverifiedCertificate(String),

    /// Malformed input outside the more specific categories above.
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// Failure reported by the embedded semidefinite solver.
    #[error("semidefinite solver failure: {0}")]
    SolverFailure(String),
}
