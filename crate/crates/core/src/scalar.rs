//! Scalar abstraction for the numeric kernels.
//!
//! Everything numeric in this crate is generic over [`Scalar`] so the same
//! code runs in `f32` or `f64`. The tolerances quoted in the test suites
//! assume `f64`; `f32` works but needs looser bounds.

use ndarray::LinalgScalar;
use num_traits::{Float, FromPrimitive, NumAssign, ToPrimitive};
use std::fmt::{Debug, Display};
use std::iter::Sum;

/// Floating-point scalar usable by all numeric kernels: `f32` or `f64`.
pub trait Scalar:
    Float + NumAssign + FromPrimitive + ToPrimitive + LinalgScalar + Sum + Debug + Display + Send + Sync + 'static
{
}

impl Scalar for f32 {}
impl Scalar for f64 {}

/// Shorthand for converting an `f64` constant into the active scalar type.
#[inline]
pub fn s<S: Scalar>(x: f64) -> S {
    S::from_f64(x).expect("f64 constant representable in scalar type")
}

/// Lossless round-trip through `f64` for serialization.
///
/// Both `f32 -> f64 -> f32` and `f64 -> f64` are exact, so persisted values
/// reload bit-identically.
#[inline]
pub fn to_f64<S: Scalar>(x: S) -> f64 {
    x.to_f64().expect("scalar convertible to f64")
}
