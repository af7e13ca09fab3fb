//! Scalar abstraction shared by every numeric routine in the crate.
//!
//! All physics, signal processing and fitting code is written against
//! [`Real`], which is implemented for `f32` and `f64`. The crate root exposes
//! `f64` aliases for everyday use.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FloatConst, FromPrimitive, NumAssign, ToPrimitive};
use serde::de::DeserializeOwned;
use serde::Serialize;

/// Floating point type usable throughout the crate: `f32` or `f64`.
pub trait Real:
    Float
    + FloatConst
    + FromPrimitive
    + ToPrimitive
    + rustfft::FftNum
    + NumAssign
    + Sum
    + Default
    + Debug
    + Display
    + Serialize
    + DeserializeOwned
    + Send
    + Sync
    + 'static
{
    /// Converts an `f64` literal, panicking only for unrepresentable values.
    #[inline]
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("literal representable in scalar type")
    }

    /// Lossy conversion to `f64` for reporting and I/O.
    #[inline]
    fn as_f64(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }

    #[inline]
    fn from_usize_lossy(n: usize) -> Self {
        Self::from_usize(n).unwrap_or_else(Self::infinity)
    }
}

impl Real for f32 {}
impl Real for f64 {}

/// Shorthand for [`Real::lit`].
#[inline]
pub(crate) fn lit<T: Real>(x: f64) -> T {
    T::lit(x)
}

/// `(1 - e^{-x}) / x`, accurate near zero.
pub(crate) fn one_minus_exp_over<T: Real>(x: T) -> T {
    if x.abs() < lit(1e-6) {
        T::one() - x / lit(2.0) + x * x / lit(6.0)
    } else {
        -(-x).exp_m1() / x
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn attenuation_factor_matches_closed_form() {
        for &x in &[1e-3_f64, 0.3, 1.0, 7.0] {
            let exact = (1.0 - (-x).exp()) / x;
            assert!((one_minus_exp_over(x) - exact).abs() < 1e-12);
        }
        let tiny = 1e-9_f64;
        assert!((one_minus_exp_over(tiny) - (1.0 - tiny / 2.0)).abs() < 1e-15);
        assert_eq!(one_minus_exp_over(0.0_f64), 1.0);
    }

    #[test]
    fn f32_and_f64_agree_on_literals() {
        assert_eq!(<f32 as Real>::lit(0.5), 0.5_f32);
        assert_eq!(<f64 as Real>::lit(0.5).as_f64(), 0.5);
    }
}
