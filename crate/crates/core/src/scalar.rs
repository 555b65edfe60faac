//! Scalar abstraction shared by the numerical modules.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FromPrimitive, ToPrimitive};

/// Real scalar used by value tables, transition models and the simplex.
pub trait Real:
    Float + FromPrimitive + ToPrimitive + Sum + Debug + Display + Default + Send + Sync + 'static
{
    /// Zero threshold for pivots and reduced costs.
    fn pivot_tolerance() -> Self;

    /// Accepted primal residual after a solve.
    fn residual_tolerance() -> Self;

    /// Lossless for `f64`, rounding for `f32`.
    fn of(value: f64) -> Self {
        Self::from_f64(value).expect("finite f64 is representable")
    }

    fn as_f64(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }
}

impl Real for f64 {
    fn pivot_tolerance() -> Self {
        1e-11
    }

    fn residual_tolerance() -> Self {
        1e-8
    }
}

impl Real for f32 {
    fn pivot_tolerance() -> Self {
        1e-5
    }

    fn residual_tolerance() -> Self {
        1e-4
    }
}
