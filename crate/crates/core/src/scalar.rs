//! Floating-point scalar abstraction shared by every numeric routine.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FromPrimitive, NumAssign, ToPrimitive};

/// Real scalar type the flow and inference code is generic over (`f32` or `f64`).
pub trait Scalar:
    Float
    + FromPrimitive
    + ToPrimitive
    + NumAssign
    + Sum
    + Debug
    + Display
    + Default
    + Send
    + Sync
    + 'static
{
    /// Lossy conversion from an `f64` literal.
    #[inline]
    fn of(x: f64) -> Self {
        Self::from_f64(x).expect("f64 is representable")
    }

    #[inline]
    fn to_f64_lossy(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }

    #[inline]
    fn of_usize(n: usize) -> Self {
        Self::from_usize(n).expect("usize is representable")
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}

/// log(2π)
pub fn ln_2pi<T: Scalar>() -> T {
    T::of(std::f64::consts::TAU.ln())
}

pub fn dot<T: Scalar>(a: &[T], b: &[T]) -> T {
    a.iter().zip(b).fold(T::zero(), |acc, (&x, &y)| acc + x * y)
}

pub fn norm_sq<T: Scalar>(a: &[T]) -> T {
    dot(a, a)
}

pub fn check_finite<T: Scalar>(context: &'static str, v: &[T]) -> crate::Result<()> {
    match v.iter().position(|x| !x.is_finite()) {
        Some(index) => Err(crate::Error::NonFinite { context, index }),
        None => Ok(()),
    }
}

/// log N(v; 0, I)
pub fn std_normal_log_density<T: Scalar>(v: &[T]) -> T {
    -(T::of_usize(v.len()) * ln_2pi::<T>() + norm_sq(v)) * T::of(0.5)
}
