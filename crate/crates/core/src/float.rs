//! Scalar abstraction for the numeric core.
//!
//! Everything numeric in this crate is generic over [`Real`], a trait alias
//! over the [`num_traits`] capabilities satisfied by `f32` and `f64`. All
//! tolerances quoted in the documentation are calibrated for `f64`, which is
//! what the crate-root type aliases fix; an `f32` instantiation compiles and
//! runs with correspondingly looser accuracy.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use ndarray::ScalarOperand;
use num_traits::{Float, FloatConst, FromPrimitive, NumAssign};

/// Floating-point scalar usable throughout the numeric core.
pub trait Real:
    Float
    + FloatConst
    + FromPrimitive
    + NumAssign
    + ScalarOperand
    + Sum
    + Debug
    + Display
    + Send
    + Sync
    + 'static
{
    /// Converts an `f64` constant into `Self` (rounding for `f32`).
    #[inline]
    fn of(value: f64) -> Self {
        Self::from_f64(value).expect("f64 constant must be representable in the scalar type")
    }

    /// Converts a count into `Self`.
    #[inline]
    fn of_usize(value: usize) -> Self {
        Self::from_usize(value).expect("usize must be representable in the scalar type")
    }

    /// Converts `self` to `f64`, for reporting and error payloads.
    #[inline]
    fn as_f64(self) -> f64 {
        self.to_f64().expect("scalar must convert to f64")
    }
}

impl<T> Real for T where
    T: Float
        + FloatConst
        + FromPrimitive
        + NumAssign
        + ScalarOperand
        + Sum
        + Debug
        + Display
        + Send
        + Sync
        + 'static
{
}
