//! Scalar abstraction for the path geometry.
//!
//! Paths, projections, metrics and the compactness checkers are written
//! against [`Scalar`] so they run on `f32` or `f64`. The simulation side
//! works in `f64` and converts when it emits collections.

use std::fmt::{Debug, Display};

use num_traits::{Float, FloatConst, FromPrimitive, ToPrimitive};

/// Floating point type usable for times and path values.
pub trait Scalar:
    Float + FloatConst + FromPrimitive + ToPrimitive + Debug + Display + Default + Send + Sync + 'static
{
    /// Absolute tolerance for breakpoint deduplication and tie handling.
    fn breakpoint_tol() -> Self;

    /// Looser tolerance for pointwise agreement tests between paths.
    fn agreement_tol() -> Self;

    /// Lossy conversion from an `f64` literal.
    #[inline]
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("f64 literal representable")
    }

    #[inline]
    fn to_f64_lossy(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }
}

impl Scalar for f64 {
    #[inline]
    fn breakpoint_tol() -> Self {
        1e-12
    }
    #[inline]
    fn agreement_tol() -> Self {
        1e-9
    }
}

impl Scalar for f32 {
    #[inline]
    fn breakpoint_tol() -> Self {
        2e-6
    }
    #[inline]
    fn agreement_tol() -> Self {
        1e-4
    }
}
