//! Scalar abstraction shared by every numeric routine in the crate.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FromPrimitive, ToPrimitive};

/// Floating point type the analysis can run on: `f32` or `f64`.
///
/// Tolerances scale with the precision of the type, so identities that hold
/// to `1e-12` in double precision are checked at a correspondingly looser
/// level in single precision.
pub trait Scalar:
    Float + FromPrimitive + ToPrimitive + Debug + Display + Default + Sum + Send + Sync + 'static
{
    /// Allowed deviation of probability totals from one.
    fn prob_tol() -> Self;
    /// Allowed violation of a proven identity or inequality, relative to
    /// `max(1, magnitude)`.
    fn check_tol() -> Self;
    /// Relative accuracy requested from adaptive quadrature.
    fn quad_tol() -> Self;

    #[inline]
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("literal representable in scalar type")
    }

    #[inline]
    fn half() -> Self {
        Self::lit(0.5)
    }

    #[inline]
    fn two() -> Self {
        Self::lit(2.0)
    }
}

impl Scalar for f64 {
    fn prob_tol() -> Self {
        1e-12
    }
    fn check_tol() -> Self {
        1e-9
    }
    fn quad_tol() -> Self {
        1e-13
    }
}

impl Scalar for f32 {
    fn prob_tol() -> Self {
        1e-5
    }
    fn check_tol() -> Self {
        1e-4
    }
    fn quad_tol() -> Self {
        1e-6
    }
}

/// `max(1, |x|)`, the scale used by relative tolerance checks.
#[inline]
pub(crate) fn unit_scale<T: Scalar>(x: T) -> T {
    x.abs().max(T::one())
}
