//! Scalar abstraction: every numerical module is generic over `Real`.

use nalgebra::RealField;
use num_traits::{FromPrimitive, NumCast};

/// Floating-point scalar. Implemented for `f32` and `f64`.
pub trait Real: RealField + FromPrimitive + NumCast + Copy + Default {
    /// Conversion from an `f64` literal, for constants and thresholds.
    #[inline]
    fn c(v: f64) -> Self {
        Self::from_f64(v).expect("finite f64 constant")
    }

    /// Conversion from a count.
    #[inline]
    fn from_count(n: usize) -> Self {
        Self::from_usize(n).expect("count representable in scalar")
    }

    /// Widening (or identity) conversion to `f64`, for logging and I/O.
    #[inline]
    fn as_f64(self) -> f64 {
        self.to_f64().expect("real scalar converts to f64")
    }

    #[inline]
    fn is_finite_scalar(self) -> bool {
        self.as_f64().is_finite()
    }
}

impl Real for f32 {}
impl Real for f64 {}
