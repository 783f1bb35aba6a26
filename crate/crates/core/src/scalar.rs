//! Exact scalar abstraction.
//!
//! Every quantity this crate computes (metric values, diameters, map
//! distances, observable values, Birkhoff averages, cycle means) is an
//! exact rational. The operations are written against the [`Scalar`]
//! trait so callers can pick a machine-word rational for speed or a
//! big-integer rational when denominators grow without bound; concrete
//! aliases live at the crate root. Floating types do not implement the
//! trait: certification relies on exact comparison, and `f64` is not
//! even `Ord`.

use std::fmt::{Debug, Display};
use std::str::FromStr;

use num_bigint::BigInt;
use num_rational::{BigRational, Rational64};
use num_traits::{Num, Signed};

/// An exact, totally ordered rational scalar.
pub trait Scalar: Num + Signed + Ord + Clone + Debug + Display {
    fn from_i64(n: i64) -> Self;

    fn from_ratio(numer: i64, denom: i64) -> Self;

    /// `2^{-exp}`, the value of one ultrametric ball of depth `exp`.
    fn half_pow(exp: usize) -> Self {
        let mut v = Self::one();
        let half = Self::from_ratio(1, 2);
        for _ in 0..exp {
            v = v * half.clone();
        }
        v
    }

    /// Parses either `p/q` or a bare integer `p`.
    fn parse(s: &str) -> Option<Self>;

    /// Renders as `p/q` (or `p` when the denominator is 1).
    fn render(&self) -> String {
        format!("{}", self)
    }
}

impl Scalar for Rational64 {
    fn from_i64(n: i64) -> Self {
        Rational64::from_integer(n)
    }

    fn from_ratio(numer: i64, denom: i64) -> Self {
        Rational64::new(numer, denom)
    }

    fn parse(s: &str) -> Option<Self> {
        Rational64::from_str(s.trim()).ok()
    }
}

impl Scalar for BigRational {
    fn from_i64(n: i64) -> Self {
        BigRational::from_integer(BigInt::from(n))
    }

    fn from_ratio(numer: i64, denom: i64) -> Self {
        BigRational::new(BigInt::from(numer), BigInt::from(denom))
    }

    fn parse(s: &str) -> Option<Self> {
        BigRational::from_str(s.trim()).ok()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn half_pow_cases<R: Scalar>() {
        assert_eq!(R::half_pow(0), R::one());
        assert_eq!(R::half_pow(1), R::from_ratio(1, 2));
        assert_eq!(R::half_pow(4), R::from_ratio(1, 16));
    }

    #[test]
    fn half_pow_both_backends() {
        half_pow_cases::<Rational64>();
        half_pow_cases::<BigRational>();
    }

    #[test]
    fn parse_and_render() {
        let r = <BigRational as Scalar>::parse("3/10").unwrap();
        assert_eq!(r, BigRational::from_ratio(3, 10));
        assert_eq!(r.render(), "3/10");
        let n = <Rational64 as Scalar>::parse("-2").unwrap();
        assert_eq!(n, Rational64::from_i64(-2));
    }

    #[test]
    fn big_denominators_do_not_wrap() {
        let tiny = <BigRational as Scalar>::half_pow(200);
        assert!(tiny > BigRational::from_i64(0));
    }
}
