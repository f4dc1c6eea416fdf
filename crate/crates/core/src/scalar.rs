//! Scalar abstraction shared by the numeric parts of the pipeline.
//!
//! Scores, feature values, classifier parameters and analysis tables are
//! generic over [`Real`], implemented for `f32` and `f64`. Counting code
//! (graph weights, Gibbs counts) stays integral.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FromPrimitive, ToPrimitive};
use serde::de::DeserializeOwned;
use serde::Serialize;

/// Floating point scalar: `f32` or `f64`.
pub trait Real:
    Float
    + FromPrimitive
    + ToPrimitive
    + Sum
    + Default
    + Debug
    + Display
    + Send
    + Sync
    + Serialize
    + DeserializeOwned
    + 'static
{
    fn of_f64(v: f64) -> Self {
        Self::from_f64(v).expect("finite f64 converts to any float")
    }

    fn of_usize(v: usize) -> Self {
        Self::from_usize(v).expect("usize converts to any float")
    }

    fn of_i64(v: i64) -> Self {
        Self::from_i64(v).expect("i64 converts to any float")
    }

    fn as_f64(self) -> f64 {
        self.to_f64().expect("float converts to f64")
    }
}

impl Real for f32 {}
impl Real for f64 {}

/// Numerically stable logistic function.
pub fn sigmoid<T: Real>(z: T) -> T {
    if z >= T::zero() {
        T::one() / (T::one() + (-z).exp())
    } else {
        let e = z.exp();
        e / (T::one() + e)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sigmoid_limits() {
        assert_eq!(sigmoid(0.0f64), 0.5);
        assert_eq!(sigmoid(1e4f64), 1.0);
        assert_eq!(sigmoid(-1e4f64), 0.0);
        assert_eq!(sigmoid(0.0f32), 0.5);
    }
}
