//! Real scalar abstraction for the floating-point half of the pipeline.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FromPrimitive, ToPrimitive};
use serde::Serialize;

/// Floating point type usable for frequencies, weights and projections.
pub trait Scalar:
    Float + FromPrimitive + ToPrimitive + Sum + Debug + Display + Default + Serialize + Send + Sync + 'static
{
    /// Tolerance used when checking frequency-flattening identities.
    const FLATTEN_TOLERANCE: Self;

    fn from_usize_lossy(v: usize) -> Self {
        Self::from_usize(v).expect("usize is representable as a float")
    }

    fn from_f64_lossy(v: f64) -> Self {
        Self::from_f64(v).expect("f64 is representable as a float")
    }

    fn to_f64_lossy(self) -> f64 {
        self.to_f64().expect("float converts to f64")
    }
}

impl Scalar for f64 {
    const FLATTEN_TOLERANCE: Self = 1e-9;
}

impl Scalar for f32 {
    const FLATTEN_TOLERANCE: Self = 1e-5;
}
