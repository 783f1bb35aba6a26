//! Eventually periodic points of the one-sided shift space.
//!
//! A point is `pre . per per per ...` held in canonical form: the period
//! is primitive and the preperiod is minimal (its last symbol differs
//! from the period's last symbol). Canonical forms make equality, hashing
//! and the ultrametric decidable, and the class is closed under every
//! rule evaluation in this crate.

use std::fmt;

use num_integer::Integer;

use crate::error::Error;
use crate::scalar::Scalar;
use crate::word::{Alphabet, Word};

#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Point {
    pre: Word,
    per: Word,
}

impl Point {
    /// Canonicalizes `pre . per^inf`: reduces the period to its primitive
    /// root, then absorbs trailing preperiod symbols into the period.
    pub fn new(pre: Word, per: Word) -> Result<Self, Error> {
        if per.is_empty() {
            return Err(Error::EmptyPeriod);
        }
        let mut per = per.primitive_root();
        let mut pre = pre;
        while let (Some(a), Some(b)) = (pre.last(), per.last()) {
            if a != b {
                break;
            }
            pre = pre.slice(0..pre.len() - 1);
            per = per.rotate_right();
        }
        Ok(Point { pre, per })
    }

    /// The purely periodic point `w^inf`.
    pub fn periodic(per: Word) -> Result<Self, Error> {
        Point::new(Word::empty(), per)
    }

    /// Parses `pre|per`, e.g. `12|1` for `12 1 1 1 ...` and `|21` for
    /// `(21)^inf`.
    pub fn parse(s: &str) -> Result<Self, Error> {
        let (pre, per) = s
            .split_once('|')
            .ok_or_else(|| Error::BadPoint(s.to_string()))?;
        Point::new(Word::parse_digits(pre)?, Word::parse_digits(per)?)
    }

    pub fn preperiod(&self) -> &Word {
        &self.pre
    }

    pub fn period(&self) -> &Word {
        &self.per
    }

    pub fn in_alphabet(&self, alphabet: Alphabet) -> bool {
        self.pre.in_alphabet(alphabet) && self.per.in_alphabet(alphabet)
    }

    /// The symbol at 0-based position `i`.
    pub fn sym(&self, i: usize) -> u8 {
        if i < self.pre.len() {
            self.pre.sym(i)
        } else {
            self.per.sym((i - self.pre.len()) % self.per.len())
        }
    }

    /// The first `n` symbols as a word.
    pub fn prefix(&self, n: usize) -> Word {
        Word::new((0..n).map(|i| self.sym(i)).collect())
    }

    pub fn starts_with(&self, w: &Word) -> bool {
        (0..w.len()).all(|i| self.sym(i) == w.sym(i))
    }

    /// The tail after dropping the first `n` symbols; still eventually
    /// periodic, with the same period up to rotation.
    pub fn drop_prefix(&self, n: usize) -> Point {
        if n <= self.pre.len() {
            Point::new(self.pre.slice(n..self.pre.len()), self.per.clone())
                .expect("period stays nonempty")
        } else {
            let k = (n - self.pre.len()) % self.per.len();
            let rotated = self.per.slice(k..self.per.len()).concat(&self.per.slice(0..k));
            Point::new(Word::empty(), rotated).expect("period stays nonempty")
        }
    }

    /// `w . self`.
    pub fn prepend(&self, w: &Word) -> Point {
        Point::new(w.concat(&self.pre), self.per.clone()).expect("period stays nonempty")
    }

    /// 0-based position of the first symbol where the two points differ,
    /// or `None` when they are equal. Agreement through the preperiods
    /// plus one lcm of the periods certifies equality.
    pub fn first_difference(&self, other: &Point) -> Option<usize> {
        if self == other {
            return None;
        }
        let bound = self.pre.len().max(other.pre.len())
            + self.per.len().lcm(&other.per.len());
        (0..bound).find(|&i| self.sym(i) != other.sym(i))
    }

    /// Whether this point equals `w^inf` shifted appropriately, i.e. its
    /// entire symbol stream is the infinite repetition of `w` from the
    /// start.
    pub fn is_repetition_of(&self, w: &Word) -> bool {
        if w.is_empty() {
            return false;
        }
        *self == Point::new(Word::empty(), w.clone()).expect("nonempty")
    }

    /// Lexicographic comparison as infinite symbol streams.
    pub fn lex_cmp(&self, other: &Point) -> std::cmp::Ordering {
        match self.first_difference(other) {
            None => std::cmp::Ordering::Equal,
            Some(i) => self.sym(i).cmp(&other.sym(i)),
        }
    }
}

/// The `2^{-i}` ultrametric: 0 for equal points, else `2^{-i}` where `i`
/// is the 1-based position of the first differing symbol.
pub fn metric_d<R: Scalar>(x: &Point, y: &Point) -> R {
    match x.first_difference(y) {
        None => R::zero(),
        Some(i) => R::half_pow(i + 1),
    }
}

impl fmt::Display for Point {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}|{}", self.pre, self.per)
    }
}

impl fmt::Debug for Point {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "p\"{}\"", self)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_rational::BigRational;

    fn w(s: &str) -> Word {
        Word::parse_digits(s).unwrap()
    }

    fn pt(s: &str) -> Point {
        Point::parse(s).unwrap()
    }

    #[test]
    fn canonicalize_period_power() {
        // ("1", "22") reduces to 1|2
        let p = Point::new(w("1"), w("22")).unwrap();
        assert_eq!(p, pt("1|2"));
        assert_eq!(p.preperiod(), &w("1"));
        assert_eq!(p.period(), &w("2"));
    }

    #[test]
    fn canonicalize_absorbs_preperiod() {
        // ("12", "2") absorbs the trailing 2: 1|2
        let p = Point::new(w("12"), w("2")).unwrap();
        assert_eq!(p, pt("1|2"));
    }

    #[test]
    fn canonicalize_already_canonical() {
        let p = Point::new(w(""), w("12")).unwrap();
        assert_eq!(p.preperiod(), &w(""));
        assert_eq!(p.period(), &w("12"));
    }

    #[test]
    fn canonicalize_idempotent() {
        let p = Point::new(w("1221"), w("2121")).unwrap();
        let q = Point::new(p.preperiod().clone(), p.period().clone()).unwrap();
        assert_eq!(p, q);
    }

    #[test]
    fn empty_period_rejected() {
        assert!(Point::new(w("1"), Word::empty()).is_err());
    }

    #[test]
    fn metric_examples() {
        let d0: BigRational = metric_d(&pt("|1"), &pt("|1"));
        assert_eq!(d0, BigRational::from_i64(0));
        let d1: BigRational = metric_d(&pt("|1"), &pt("|2"));
        assert_eq!(d1, BigRational::from_ratio(1, 2));
        let d2: BigRational = metric_d(&pt("1|1"), &pt("12|1"));
        assert_eq!(d2, BigRational::from_ratio(1, 4));
    }

    #[test]
    fn first_difference_needs_full_lcm_window() {
        // (12)^inf and (121122)^inf agree on the first 3 symbols.
        let a = pt("|12");
        let b = pt("|121122");
        assert_eq!(a.first_difference(&b), Some(3));
        // A point equal to itself under a different presentation.
        let c = Point::new(w("12"), w("1212")).unwrap();
        assert_eq!(pt("|12").first_difference(&c), None);
    }

    #[test]
    fn drop_and_prepend() {
        let p = pt("221|1");
        assert_eq!(p.drop_prefix(3), pt("|1"));
        assert_eq!(p.drop_prefix(1), pt("21|1"));
        let q = pt("|21").drop_prefix(1);
        assert_eq!(q, pt("|12"));
        assert_eq!(q.prepend(&w("2")), pt("|21"));
        // prepend then canonicalize: 1 . 2^inf
        assert_eq!(pt("|2").prepend(&w("1")), pt("1|2"));
    }

    #[test]
    fn symbol_stream() {
        let p = pt("12|21");
        let syms: Vec<u8> = (0..7).map(|i| p.sym(i)).collect();
        assert_eq!(syms, vec![1, 2, 2, 1, 2, 1, 2]);
        assert!(p.starts_with(&w("1221")));
        assert!(!p.starts_with(&w("122112")));
    }
}
