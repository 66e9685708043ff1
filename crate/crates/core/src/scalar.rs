//! Scalar abstraction for the numeric pipeline: f32 or f64.

use std::fmt::{Debug, Display};

use num_traits::{Float, FromPrimitive, NumAssignOps};

/// Floating-point scalar used throughout the embedding, similarity and
/// clustering stages. Implemented for `f32` and `f64`.
pub trait Scalar:
    Float + FromPrimitive + NumAssignOps + Debug + Display + Default + Send + Sync + 'static
{
    /// Lossless-enough conversion from `f64` constants and hyperparameters.
    fn from_f64_lossy(value: f64) -> Self {
        Self::from_f64(value).expect("finite f64 converts to scalar")
    }

    /// Widening conversion for exports and reductions done in f64.
    fn into_f64(self) -> f64 {
        self.to_f64().expect("scalar converts to f64")
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}
