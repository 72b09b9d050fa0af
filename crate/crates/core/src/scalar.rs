//! Floating-point scalar abstraction for the exact MDP mathematics.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FromPrimitive, ToPrimitive};

/// Real scalar the exact MDP operators are generic over: `f32` or `f64`.
pub trait Scalar:
    Float + FromPrimitive + ToPrimitive + Sum + Debug + Display + Default + Send + Sync + 'static
{
    /// Absolute tolerance on `Σ_{s'} p(s'|s,a) = 1`.
    const NORMALIZATION_TOL: f64;
    /// Largest negative variance accepted as floating-point cancellation.
    const VARIANCE_CANCELLATION_TOL: f64;

    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("literal representable in scalar type")
    }

    fn as_f64(self) -> f64 {
        self.to_f64().expect("scalar converts to f64")
    }
}

impl Scalar for f64 {
    const NORMALIZATION_TOL: f64 = 1e-12;
    const VARIANCE_CANCELLATION_TOL: f64 = 1e-12;
}

impl Scalar for f32 {
    const NORMALIZATION_TOL: f64 = 1e-5;
    const VARIANCE_CANCELLATION_TOL: f64 = 1e-5;
}
