//! Scalar abstraction for the numeric core.
//!
//! Everything that does arithmetic (tensors, layers, metrics) is generic over
//! [`Real`], which is satisfied by `f32` and `f64`. Random draws are always
//! made in `f64` and converted, so a run with the same seed visits the same
//! sample path regardless of the scalar in use.

use ndarray::{NdFloat, ScalarOperand};
use num_traits::{Float, FromPrimitive, ToPrimitive};

/// Floating-point scalar usable throughout the harness.
pub trait Real:
    NdFloat + Float + FromPrimitive + ToPrimitive + ScalarOperand + Send + Sync + 'static
{
    /// Lossless-enough conversion from `f64` (used for constants and RNG draws).
    fn from_f64_c(v: f64) -> Self {
        Self::from_f64(v).expect("f64 conversion")
    }

    /// Convert to `f64` for reporting and serialization.
    fn to_f64_c(self) -> f64 {
        self.to_f64().expect("f64 conversion")
    }
}

impl Real for f32 {}
impl Real for f64 {}
