//! Scalar abstraction for the dense kernels.
//!
//! The small-factor linear algebra (QR, thin SVD, products) and the DCT are
//! written once over [`Scalar`] and instantiated for `f64`, which is the
//! working precision of the out-of-core pipeline, and `f32`, which is the
//! on-disk storage precision.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FromPrimitive, NumAssign};
use rustfft::FftNum;

/// Real floating-point element type usable by every dense kernel.
pub trait Scalar:
    Float + FromPrimitive + NumAssign + FftNum + Sum + Default + Debug + Display + Send + Sync + 'static
{
    /// Lossless-when-possible conversion from `f64` (rounds to nearest for `f32`).
    fn from_f64_lossy(x: f64) -> Self;
    fn to_f64_lossless(self) -> f64;
}

impl Scalar for f64 {
    #[inline]
    fn from_f64_lossy(x: f64) -> Self {
        x
    }
    #[inline]
    fn to_f64_lossless(self) -> f64 {
        self
    }
}

impl Scalar for f32 {
    #[inline]
    fn from_f64_lossy(x: f64) -> Self {
        x as f32
    }
    #[inline]
    fn to_f64_lossless(self) -> f64 {
        self as f64
    }
}
