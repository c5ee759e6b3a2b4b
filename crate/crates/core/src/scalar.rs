//! Floating-point abstraction shared by the numeric modules.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FromPrimitive, ToPrimitive};

/// Real scalar type the models are generic over: `f32` or `f64`.
pub trait Scalar:
    Float + FromPrimitive + ToPrimitive + Debug + Display + Default + Sum + Send + Sync + 'static
{
    /// Validation slack used where an invariant asks for "sums to one"-style
    /// checks. `1e-12` for `f64`, scaled up to the type's epsilon otherwise.
    fn normalization_tolerance() -> Self {
        let eps = Self::epsilon() * lit(64.0);
        let fixed: Self = lit(1e-12);
        if eps > fixed {
            eps
        } else {
            fixed
        }
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}

/// Converts an `f64` constant into `T`.
#[inline]
pub fn lit<T: Scalar>(v: f64) -> T {
    T::from_f64(v).expect("finite f64 constant is representable")
}

/// `ln(2π)`.
#[inline]
pub fn ln_2pi<T: Scalar>() -> T {
    lit(std::f64::consts::TAU.ln())
}

/// Numerically stable `ln Σ exp(v)`. Returns `-inf` for an empty slice.
pub fn log_sum_exp<T: Scalar>(values: &[T]) -> T {
    let max = values
        .iter()
        .copied()
        .fold(T::neg_infinity(), |m, v| if v > m { v } else { m });
    if !max.is_finite() {
        return max;
    }
    let sum: T = values.iter().map(|&v| (v - max).exp()).sum();
    max + sum.ln()
}

/// Single-pass log-sum-exp accumulator; avoids a scratch buffer in hot loops.
#[derive(Clone, Copy, Debug)]
pub struct LogSumExp<T> {
    max: T,
    scaled_sum: T,
}

impl<T: Scalar> Default for LogSumExp<T> {
    fn default() -> Self {
        Self {
            max: T::neg_infinity(),
            scaled_sum: T::zero(),
        }
    }
}

impl<T: Scalar> LogSumExp<T> {
    #[inline]
    pub fn push(&mut self, v: T) {
        if v <= self.max {
            self.scaled_sum = self.scaled_sum + (v - self.max).exp();
        } else if self.max == T::neg_infinity() {
            self.max = v;
            self.scaled_sum = T::one();
        } else {
            self.scaled_sum = self.scaled_sum * (self.max - v).exp() + T::one();
            self.max = v;
        }
    }

    #[inline]
    pub fn value(&self) -> T {
        if self.max == T::neg_infinity() {
            return self.max;
        }
        self.max + self.scaled_sum.ln()
    }
}
