//! Alphabets and finite words.
//!
//! Symbols are `1..=N`. The empty word denotes the whole-space cylinder.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::Error;

/// The symbol alphabet `{1, .., N}`. A one-symbol alphabet would make the
/// space a single point, so `N >= 2` is enforced.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Debug, Serialize, Deserialize)]
pub struct Alphabet(u8);

impl Alphabet {
    pub fn new(n: u8) -> Result<Self, Error> {
        if n < 2 {
            return Err(Error::AlphabetTooSmall(n));
        }
        Ok(Alphabet(n))
    }

    pub fn size(&self) -> u8 {
        self.0
    }

    pub fn symbols(&self) -> std::ops::RangeInclusive<u8> {
        1..=self.0
    }

    pub fn contains(&self, sym: u8) -> bool {
        (1..=self.0).contains(&sym)
    }

    /// All words of the given length, in lexicographic order.
    pub fn words_of_len(&self, len: usize) -> Vec<Word> {
        let mut out = vec![Word::empty()];
        for _ in 0..len {
            let mut next = Vec::with_capacity(out.len() * self.0 as usize);
            for w in &out {
                for a in self.symbols() {
                    next.push(w.append_sym(a));
                }
            }
            out = next;
        }
        out
    }
}

/// A finite word over an alphabet; possibly empty.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct Word(Vec<u8>);

impl Word {
    pub fn empty() -> Self {
        Word(Vec::new())
    }

    pub fn new(symbols: Vec<u8>) -> Self {
        Word(symbols)
    }

    pub fn from_syms(symbols: &[u8]) -> Self {
        Word(symbols.to_vec())
    }

    /// Parses a digit string such as `"121"`. Only usable for `N <= 9`.
    pub fn parse_digits(s: &str) -> Result<Self, Error> {
        let mut syms = Vec::with_capacity(s.len());
        for c in s.chars() {
            let d = c.to_digit(10).ok_or_else(|| Error::BadWord(s.to_string()))?;
            if !(1..=9).contains(&d) {
                return Err(Error::BadWord(s.to_string()));
            }
            syms.push(d as u8);
        }
        Ok(Word(syms))
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn syms(&self) -> &[u8] {
        &self.0
    }

    pub fn sym(&self, i: usize) -> u8 {
        self.0[i]
    }

    pub fn last(&self) -> Option<u8> {
        self.0.last().copied()
    }

    pub fn in_alphabet(&self, alphabet: Alphabet) -> bool {
        self.0.iter().all(|&s| alphabet.contains(s))
    }

    pub fn append_sym(&self, sym: u8) -> Word {
        let mut v = self.0.clone();
        v.push(sym);
        Word(v)
    }

    pub fn concat(&self, other: &Word) -> Word {
        let mut v = self.0.clone();
        v.extend_from_slice(&other.0);
        Word(v)
    }

    pub fn repeat(&self, times: usize) -> Word {
        let mut v = Vec::with_capacity(self.0.len() * times);
        for _ in 0..times {
            v.extend_from_slice(&self.0);
        }
        Word(v)
    }

    pub fn is_prefix_of(&self, other: &Word) -> bool {
        other.0.len() >= self.0.len() && other.0[..self.0.len()] == self.0[..]
    }

    /// Prefix-comparable: one of the two words extends the other, i.e. the
    /// corresponding cylinders intersect.
    pub fn comparable(&self, other: &Word) -> bool {
        self.is_prefix_of(other) || other.is_prefix_of(self)
    }

    /// The suffix left after removing the prefix `prefix`.
    pub fn strip_prefix(&self, prefix: &Word) -> Option<Word> {
        if prefix.is_prefix_of(self) {
            Some(Word(self.0[prefix.len()..].to_vec()))
        } else {
            None
        }
    }

    pub fn slice(&self, range: std::ops::Range<usize>) -> Word {
        Word(self.0[range].to_vec())
    }

    /// Rotates right by one: `abc -> cab`. Used when absorbing a preperiod
    /// symbol into the period.
    pub fn rotate_right(&self) -> Word {
        if self.0.is_empty() {
            return self.clone();
        }
        let mut v = Vec::with_capacity(self.0.len());
        v.push(*self.0.last().unwrap());
        v.extend_from_slice(&self.0[..self.0.len() - 1]);
        Word(v)
    }

    /// The shortest word whose repetition gives this word.
    pub fn primitive_root(&self) -> Word {
        let n = self.0.len();
        for d in 1..=n {
            if n % d != 0 {
                continue;
            }
            if (d..n).all(|i| self.0[i] == self.0[i - d]) {
                return Word(self.0[..d].to_vec());
            }
        }
        self.clone()
    }
}

/// Length of the longest common prefix of two words.
pub fn lcp(a: &Word, b: &Word) -> usize {
    a.syms()
        .iter()
        .zip(b.syms())
        .take_while(|(x, y)| x == y)
        .count()
}

impl fmt::Debug for Word {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "w\"{}\"", self)
    }
}

impl fmt::Display for Word {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0.iter().all(|&s| s <= 9) {
            for s in &self.0 {
                write!(f, "{}", s)?;
            }
            Ok(())
        } else {
            let parts: Vec<String> = self.0.iter().map(|s| s.to_string()).collect();
            write!(f, "[{}]", parts.join(","))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn w(s: &str) -> Word {
        Word::parse_digits(s).unwrap()
    }

    #[test]
    fn lcp_examples() {
        assert_eq!(lcp(&w("12"), &w("13")), 1);
        assert_eq!(lcp(&Word::empty(), &w("2")), 0);
        assert_eq!(lcp(&w("121"), &w("121")), 3);
    }

    #[test]
    fn alphabet_bounds() {
        assert!(Alphabet::new(1).is_err());
        let a = Alphabet::new(3).unwrap();
        assert!(a.contains(3));
        assert!(!a.contains(4));
        assert_eq!(a.words_of_len(2).len(), 9);
    }

    #[test]
    fn primitive_root() {
        assert_eq!(w("2222").primitive_root(), w("2"));
        assert_eq!(w("1212").primitive_root(), w("12"));
        assert_eq!(w("112").primitive_root(), w("112"));
    }

    #[test]
    fn rotate_and_strip() {
        assert_eq!(w("123").rotate_right(), w("312"));
        assert_eq!(w("123").strip_prefix(&w("12")), Some(w("3")));
        assert_eq!(w("123").strip_prefix(&w("2")), None);
    }
}
