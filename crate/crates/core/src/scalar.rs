//! Scalar abstraction for the numeric kernels.

use num_traits::{Float, FloatConst, FromPrimitive, NumAssign, ToPrimitive};
use rustfft::FftNum;
use std::fmt::Display;
use std::iter::Sum;

/// Floating-point scalar the analysis kernels are generic over.
///
/// Implemented for `f32` and `f64`. Signal storage and elementwise DSP run
/// in `Self`; precision-sensitive accumulations (covariance sums, filter
/// design, normal-quantile tables) are carried out in `f64` and cast back.
pub trait Scalar:
    Float + FloatConst + NumAssign + FromPrimitive + ToPrimitive + FftNum + Sum<Self> + Display
{
    /// Lossy conversion from an `f64` constant.
    fn cast(x: f64) -> Self {
        Self::from_f64(x).expect("finite f64 converts to any Scalar")
    }

    /// Widen to `f64`.
    fn as_f64(self) -> f64 {
        self.to_f64().expect("Scalar widens to f64")
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}
