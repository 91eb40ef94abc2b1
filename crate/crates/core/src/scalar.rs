use std::fmt::{Debug, Display};

use num_traits::{Float, FromPrimitive};

/// Real number type carried by vertex values, messages and aggregators.
///
/// Implemented for `f32` and `f64`. The engine never mixes scalar types
/// within one run.
pub trait Scalar: Float + FromPrimitive + Debug + Display + Send + Sync + 'static {
    /// Lossless-enough conversion of a count (out-degree, vertex total).
    fn from_count(n: usize) -> Self {
        <Self as FromPrimitive>::from_usize(n).expect("count representable as float")
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}
