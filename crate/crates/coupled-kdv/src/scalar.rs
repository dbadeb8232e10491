//! Scalar abstraction for the floating-point type used throughout the core.

use num_traits::{Float, FloatConst, FromPrimitive};
use rustfft::FftNum;
use std::fmt::{Debug, Display, LowerExp};
use std::iter::Sum;

/// Floating-point scalar the spectral core is generic over.
pub trait Scalar:
    Float + FloatConst + FromPrimitive + FftNum + Sum<Self> + Display + LowerExp + Debug
{
}

impl Scalar for f32 {}
impl Scalar for f64 {}

/// Shorthand for embedding an `f64` literal into the generic scalar type.
#[inline]
pub fn real<T: Scalar>(x: f64) -> T {
    T::from_f64(x).expect("f64 literal must embed into the scalar type")
}
