//! Scalar abstraction for the field kernels.
//!
//! Wavefields, models and gradients are generic over [`Scalar`] so the same
//! kernels run in f32 for production work and in f64 for the adjoint and
//! Taylor verification harnesses. Geometry (positions, spacings, times) is
//! always f64.

use num_traits::{Float, FromPrimitive, NumAssign};

/// Floating-point element type of fields and gradients: f32 or f64.
pub trait Scalar:
    Float + FromPrimitive + NumAssign + Copy + Send + Sync + std::fmt::Debug + std::fmt::Display + 'static
{
    fn of(v: f64) -> Self {
        <Self as FromPrimitive>::from_f64(v).expect("f64 -> scalar")
    }
    fn as_f64(self) -> f64;
}

impl Scalar for f32 {
    fn as_f64(self) -> f64 {
        self as f64
    }
}

impl Scalar for f64 {
    fn as_f64(self) -> f64 {
        self
    }
}
