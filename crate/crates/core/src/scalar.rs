//! Numeric abstraction shared by the scoring and statistics code.
//!
//! Everything that produces a ratio (word error rates, mean durations,
//! confidences) is generic over [`Scalar`], so the same code can run in
//! `f32`, `f64`, or exactly in rational arithmetic.

use num_bigint::BigInt;
use num_rational::{BigRational, Rational64};
use num_traits::{Num, ToPrimitive};
use std::fmt::Debug;

/// A number type that ratios of counts can be expressed in.
pub trait Scalar: Clone + Debug + PartialOrd + Num + Send + Sync + 'static {
    /// `numer / denom`. `denom` must be non-zero.
    fn from_ratio(numer: u64, denom: u64) -> Self;

    /// Nearest `f64`, used for display and JSON output.
    fn to_f64(&self) -> f64;

    fn from_count(n: u64) -> Self {
        Self::from_ratio(n, 1)
    }
}

impl Scalar for f32 {
    fn from_ratio(numer: u64, denom: u64) -> Self {
        (numer as f64 / denom as f64) as f32
    }

    fn to_f64(&self) -> f64 {
        f64::from(*self)
    }
}

impl Scalar for f64 {
    fn from_ratio(numer: u64, denom: u64) -> Self {
        numer as f64 / denom as f64
    }

    fn to_f64(&self) -> f64 {
        *self
    }
}

impl Scalar for Rational64 {
    fn from_ratio(numer: u64, denom: u64) -> Self {
        let numer = i64::try_from(numer).expect("numerator exceeds i64");
        let denom = i64::try_from(denom).expect("denominator exceeds i64");
        Rational64::new(numer, denom)
    }

    fn to_f64(&self) -> f64 {
        ToPrimitive::to_f64(self).unwrap_or(f64::NAN)
    }
}

impl Scalar for BigRational {
    fn from_ratio(numer: u64, denom: u64) -> Self {
        BigRational::new(BigInt::from(numer), BigInt::from(denom))
    }

    fn to_f64(&self) -> f64 {
        ToPrimitive::to_f64(self).unwrap_or(f64::NAN)
    }
}

/// Arithmetic mean of `values`, `None` when empty.
pub fn mean<T: Scalar>(values: impl IntoIterator<Item = T>) -> Option<T> {
    let mut sum = T::zero();
    let mut n = 0u64;
    for v in values {
        sum = sum + v;
        n += 1;
    }
    (n > 0).then(|| sum / T::from_count(n))
}

/// Rounds `numer / denom` to an integer, ties to even.
pub(crate) fn div_round_half_even(numer: u128, denom: u128) -> u128 {
    let q = numer / denom;
    let r = numer % denom;
    match (2 * r).cmp(&denom) {
        std::cmp::Ordering::Less => q,
        std::cmp::Ordering::Greater => q + 1,
        std::cmp::Ordering::Equal => q + (q & 1),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ratios_agree_across_types() {
        assert_eq!(<f64 as Scalar>::from_ratio(1, 4), 0.25);
        assert_eq!(<f32 as Scalar>::from_ratio(1, 4), 0.25);
        assert_eq!(Rational64::from_ratio(2, 6), Rational64::new(1, 3));
        assert_eq!(
            BigRational::from_ratio(2, 6),
            BigRational::new(1.into(), 3.into())
        );
    }

    #[test]
    fn exact_mean() {
        let m = mean([Rational64::new(1, 5), Rational64::new(2, 5)]).unwrap();
        assert_eq!(m, Rational64::new(3, 10));
        assert!(mean(Vec::<f64>::new()).is_none());
    }

    #[test]
    fn half_even() {
        assert_eq!(div_round_half_even(5, 10), 0);
        assert_eq!(div_round_half_even(15, 10), 2);
        assert_eq!(div_round_half_even(25, 10), 2);
        assert_eq!(div_round_half_even(26, 10), 3);
        assert_eq!(div_round_half_even(24, 10), 2);
    }
}
