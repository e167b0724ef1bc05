use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FromPrimitive, ToPrimitive};

/// Floating point type the ERM layer is generic over (`f32` or `f64`).
pub trait Scalar: Float + FromPrimitive + ToPrimitive + Sum + Debug + Display + Send + Sync + 'static {
    /// Converts an `f64` literal, rounding to the nearest representable value.
    fn lit(value: f64) -> Self {
        Self::from_f64(value).expect("f64 literal is representable")
    }

    fn to_f64_lossy(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}
