//! Scalar abstraction shared by every numeric routine in the crate.

use std::fmt::{Debug, Display, LowerExp};
use std::iter::Sum;

use num_traits::{Float, FloatConst, FromPrimitive, NumAssign, ToPrimitive};
use serde::de::DeserializeOwned;
use serde::Serialize;

/// Floating point scalar: `f32` or `f64`.
pub trait Real:
    Float
    + FloatConst
    + FromPrimitive
    + ToPrimitive
    + NumAssign
    + Sum
    + Default
    + Debug
    + Display
    + LowerExp
    + Send
    + Sync
    + Serialize
    + DeserializeOwned
    + 'static
{
    /// Converts an `f64` literal into the scalar type.
    #[inline]
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("f64 literal representable")
    }

    /// Converts a count into the scalar type.
    #[inline]
    fn from_count(n: usize) -> Self {
        Self::from_usize(n).expect("count representable")
    }

    #[inline]
    fn to_f64_lossy(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }
}

impl Real for f32 {}
impl Real for f64 {}

/// Positive part `max(x, 0)`.
#[inline]
pub fn pos<T: Real>(x: T) -> T {
    if x > T::zero() {
        x
    } else {
        T::zero()
    }
}

/// Numerically stable `log(sum_k w_k exp(a_k))` for nonnegative weights.
pub fn log_sum_exp_weighted<T: Real>(a: &[T], w: &[T]) -> T {
    let mut max = T::neg_infinity();
    for (&ak, &wk) in a.iter().zip(w) {
        if wk > T::zero() && ak > max {
            max = ak;
        }
    }
    if max == T::neg_infinity() {
        return max;
    }
    let s: T = a
        .iter()
        .zip(w)
        .map(|(&ak, &wk)| wk * (ak - max).exp())
        .sum();
    max + s.ln()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lse_matches_naive() {
        let a = [0.3_f64, -1.2, 2.5];
        let w = [0.2, 0.5, 0.3];
        let naive: f64 = a.iter().zip(&w).map(|(x, y)| y * x.exp()).sum::<f64>().ln();
        assert!((log_sum_exp_weighted(&a, &w) - naive).abs() < 1e-14);
    }

    #[test]
    fn lse_survives_large_arguments() {
        let a = [1000.0_f64, 1000.0];
        let w = [0.5, 0.5];
        assert!((log_sum_exp_weighted(&a, &w) - 1000.0).abs() < 1e-12);
    }
}
