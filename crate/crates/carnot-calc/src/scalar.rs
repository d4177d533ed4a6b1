//! Scalar abstraction shared by every numerical routine.

use std::fmt::{Debug, Display};

use num_traits::{Float, FromPrimitive, ToPrimitive};

/// Floating-point scalar accepted by the library (`f32` or `f64`).
pub trait Real:
    Float + FromPrimitive + ToPrimitive + Debug + Display + Default + Send + Sync + 'static
{
}

impl Real for f32 {}
impl Real for f64 {}

/// Converts an `f64` literal into the working scalar.
#[inline]
pub fn lit<T: Real>(v: f64) -> T {
    T::from_f64(v).expect("literal representable in scalar type")
}

/// Converts a count into the working scalar.
#[inline]
pub fn count<T: Real>(n: usize) -> T {
    T::from_usize(n).expect("count representable in scalar type")
}

/// Euclidean norm of a slice.
pub fn norm<T: Real>(v: &[T]) -> T {
    v.iter().fold(T::zero(), |acc, &x| acc + x * x).sqrt()
}

/// Max-norm of a slice.
pub fn max_abs<T: Real>(v: &[T]) -> T {
    v.iter().fold(T::zero(), |acc, &x| acc.max(x.abs()))
}

/// Dot product of two equal-length slices.
pub fn dot<T: Real>(a: &[T], b: &[T]) -> T {
    a.iter().zip(b).fold(T::zero(), |acc, (&x, &y)| acc + x * y)
}

/// Default finite-difference step for the Richardson-refined central stencil.
///
/// The fourth-order stencil balances truncation `h^4` against rounding
/// `eps/h`, which puts the optimum near `eps^(1/5)`.
pub fn default_step<T: Real>() -> T {
    T::epsilon().powf(lit(0.2))
}

/// Step used when derivatives are nested two or three levels deep.
pub fn nested_step<T: Real>() -> T {
    T::epsilon().powf(lit(1.0 / 6.0))
}
