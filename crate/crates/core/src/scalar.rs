//! Scalar abstraction shared by every estimator in the crate.

use std::fmt::{Debug, Display, LowerExp};
use std::iter::Sum;

use num_traits::{Float, FromPrimitive, ToPrimitive};

/// Floating-point type the estimators are generic over (`f32` or `f64`).
///
/// Special functions are evaluated in `f64` and rounded back, so `f32`
/// runs trade precision for memory but share every code path.
pub trait Scalar:
    Float
    + FromPrimitive
    + ToPrimitive
    + Sum
    + Debug
    + Display
    + LowerExp
    + Default
    + Send
    + Sync
    + 'static
{
    /// Converts an `f64` literal.
    #[inline]
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("f64 literal representable")
    }

    #[inline]
    fn as_f64(self) -> f64 {
        self.to_f64().expect("scalar converts to f64")
    }

    #[inline]
    fn from_usize_lossy(n: usize) -> Self {
        Self::from_usize(n).expect("count representable")
    }

    /// `max(default, sqrt(eps))`: a tolerance that is never tighter than the
    /// type can resolve.
    #[inline]
    fn tol_at_least(default: f64) -> Self {
        Self::lit(default).max(Self::epsilon().sqrt())
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}

/// Sup-norm of a slice.
pub(crate) fn sup_norm<S: Scalar>(v: &[S]) -> S {
    v.iter().fold(S::zero(), |m, x| m.max(x.abs()))
}

/// Euclidean norm of a slice.
pub(crate) fn l2_norm<S: Scalar>(v: &[S]) -> S {
    v.iter().map(|x| *x * *x).sum::<S>().sqrt()
}
