//! Scalar abstractions.
//!
//! The algebraic parts of the crate (jump maps, drift maps, time reversal of
//! event lists) only need ordered-field arithmetic and are generic over
//! [`Scalar`], which admits exact rationals. Everything that touches `exp`,
//! `log` or sampling is generic over [`Real`] (`f32` / `f64`).

use std::fmt::{Debug, Display, LowerExp};
use std::ops::Neg;

use num_traits::{Float, FloatConst, FromPrimitive, Num, ToPrimitive};

/// Ordered field element.
pub trait Scalar:
    Num + Neg<Output = Self> + Clone + PartialOrd + FromPrimitive + Debug + Send + Sync + 'static
{
    fn magnitude(&self) -> Self {
        if *self < Self::zero() {
            -self.clone()
        } else {
            self.clone()
        }
    }

    /// Converts an `f64` constant; panics only for values the type cannot hold.
    fn constant(x: f64) -> Self {
        Self::from_f64(x).expect("constant not representable")
    }
}

impl<S> Scalar for S where
    S: Num + Neg<Output = S> + Clone + PartialOrd + FromPrimitive + Debug + Send + Sync + 'static
{
}

/// Floating point scalar used for simulation.
pub trait Real: Scalar + Float + FloatConst + ToPrimitive + Copy + Default + Display + LowerExp {
    #[inline]
    fn lit(x: f64) -> Self {
        <Self as Scalar>::constant(x)
    }

    #[inline]
    fn as_f64(self) -> f64 {
        ToPrimitive::to_f64(&self).unwrap_or(f64::NAN)
    }
}

impl Real for f32 {}
impl Real for f64 {}

/// Relative closeness with an absolute floor of one.
pub fn mixed_error<T: Real>(a: T, b: T) -> T {
    (a - b).abs() / T::one().max(a.abs()).max(b.abs())
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_rational::BigRational;

    #[test]
    fn magnitude_on_rationals() {
        let x = BigRational::from_f64(-0.75).unwrap();
        assert_eq!(x.magnitude(), BigRational::from_f64(0.75).unwrap());
    }

    #[test]
    fn mixed_error_floors_at_one() {
        assert_eq!(mixed_error(1e-3_f64, 0.0), 1e-3);
        assert!((mixed_error(1e6_f64, 1e6 + 1.0) - 1e-6).abs() < 1e-12);
    }
}
