//! Scalar abstraction: all numerical code is generic over a real scalar type.

use nalgebra::RealField;
use num_traits::{FromPrimitive, ToPrimitive};

/// Real scalar type the library computes with.
///
/// Implemented by `f32` and `f64`. The bound collects what the numerical code
/// needs: field arithmetic and elementary functions ([`RealField`]),
/// conversions to and from `f64` for literals and for the `f64`-internal
/// semidefinite solve, and by-value copying.
///
/// Tolerances quoted throughout the API documentation (for example the
/// `1e-9` inner-solver tolerance) are `f64` figures; in lower-precision
/// scalar types they are clamped from below by a small multiple of the
/// machine epsilon via [`eps_clamped`], so `f32` instantiations degrade
/// gracefully instead of looping forever on unreachable tolerances.
pub trait Scalar: RealField + FromPrimitive + ToPrimitive + Copy + Default {}

impl<T> Scalar for T where T: RealField + FromPrimitive + ToPrimitive + Copy + Default {}

/// Converts an `f64` literal into the working scalar type.
///
/// Panics if the value is not representable, which cannot happen for the
/// in-range constants used by this crate.
#[inline]
pub fn c<T: Scalar>(x: f64) -> T {
    T::from_f64(x).expect("scalar conversion from f64 literal failed")
}

/// Converts a scalar back to `f64` (exact for `f32`/`f64`).
#[inline]
pub fn to_f64<T: Scalar>(x: T) -> f64 {
    x.to_f64().expect("scalar conversion to f64 failed")
}

/// A documented `f64` tolerance, clamped from below by `100·ε` of the working
/// scalar type so it remains achievable in lower precision.
#[inline]
pub fn eps_clamped<T: Scalar>(tol: f64) -> T {
    let t = c::<T>(tol);
    let floor = T::default_epsilon() * c::<T>(100.0);
    if t < floor {
        floor
    } else {
        t
    }
}

/// True when the scalar is neither NaN nor infinite.
#[inline]
pub fn is_finite<T: Scalar>(x: T) -> bool {
    to_f64(x).is_finite()
}
