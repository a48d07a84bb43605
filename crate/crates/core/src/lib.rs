//! Rate certification for first-order optimization algorithms viewed as Lur'e
//! systems, and for their projected variants on constrained problems.
//!
//! The library is organized around a small pipeline:
//!
//! 1. [`lure`] — dimension-reduced state-space representations of iterative
//!    algorithms, and the canonical "output-as-state" form in which the
//!    algorithm output is the first state block.
//! 2. [`algorithms`] — factories for gradient descent, Nesterov's method, the
//!    triple momentum method and the heavy-ball method; a simulation engine
//!    for unconstrained and projected runs; empirical rate estimation.
//! 3. [`sets`] — convex constraint sets with exact Euclidean projections,
//!    weighted and linearly transformed projections, block projections, and
//!    normal-cone residuals.
//! 4. [`problems`] — strongly convex objectives with sector metadata, gradient
//!    oracles, and an independent reference solver used as a test oracle.
//! 5. [`certify`] — quadratic-constraint multipliers, augmented-system
//!    assembly, the rate LMI, a semidefinite feasibility search, a
//!    deterministic certificate verifier, and rate bisection.
//! 6. [`lemmas`] — seeded property suites for the projection identities that
//!    underpin the projected-variant rate argument.
//!
//! All system matrices are stored in reduced (Kronecker) form: a reduced
//! matrix `K` stands for `K ⊗ I_d`, and the problem dimension `d` enters only
//! at simulation time. Numerical code is generic over the scalar type through
//! [`scalar::Scalar`] (implemented by `f32` and `f64`); concrete aliases for
//! the common types are exported at the crate root.

pub mod algorithms;
pub mod certify;
pub mod error;
pub mod lemmas;
mod linalg;
pub mod lure;
pub mod problems;
pub mod scalar;
pub mod sets;

pub use error::{Error, Result};
pub use scalar::Scalar;

/// `f64` aliases for the main pipeline types.
pub type ReducedSystem64 = lure::ReducedSystem<f64>;
/// See [`ReducedSystem64`].
pub type ReducedSystem32 = lure::ReducedSystem<f32>;
/// `f64` output-as-state form.
pub type OutputForm64 = lure::OutputForm<f64>;
/// `f32` output-as-state form.
pub type OutputForm32 = lure::OutputForm<f32>;
/// `f64` constraint set.
pub type ConvexSet64 = sets::ConvexSet<f64>;
/// `f32` constraint set.
pub type ConvexSet32 = sets::ConvexSet<f32>;
/// `f64` quadratic objective.
pub type QuadraticObjective64 = problems::QuadraticObjective<f64>;
/// `f32` quadratic objective.
pub type QuadraticObjective32 = problems::QuadraticObjective<f32>;
/// `f64` rate certificate.
pub type Certificate64 = certify::Certificate<f64>;
/// `f32` rate certificate.
pub type Certificate32 = certify::Certificate<f32>;
/// `f64` simulated trajectory.
pub type Trajectory64 = algorithms::Trajectory<f64>;
/// `f32` simulated trajectory.
pub type Trajectory32 = algorithms::Trajectory<f32>;
