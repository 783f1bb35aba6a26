//! Shell decompositions: a nonempty clopen set written as countably many
//! disjoint clopen shells shrinking to a single limit point.
//!
//! The canonical choice: take the lexicographically first cylinder `c1`
//! of the set, let the limit be `c1 . 1^inf`, keep everything outside
//! `[c1]` as the finite head, and peel `[c1]` into the regular shells
//! `[c1 . 1^(m-1) . a]`, `a = 2..N`, `m >= 1`.

use crate::clopen::ClopenSet;
use crate::error::Error;
use crate::point::Point;
use crate::word::Word;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ShellDecomposition {
    /// The limit point `ladder_base . 1^inf`.
    pub limit: Point,
    /// The finitely many irregular shells (everything off `[ladder_base]`).
    pub head: ClopenSet,
    /// `c1`, the cylinder carrying the regular ladder.
    pub ladder_base: Word,
    /// The repeated ladder word (always `"1"` here).
    pub ladder: Word,
    /// Index of the first regular shell.
    pub start_index: usize,
}

impl ShellDecomposition {
    /// Regular shell `m` (1-based): the union of `[base . 1^(m-1) . a]`
    /// over `a = 2..N`.
    pub fn regular_shell(&self, m: usize) -> ClopenSet {
        let alphabet = self.head.alphabet();
        let stem = self.ladder_base.concat(&self.ladder.repeat(m - 1));
        ClopenSet::new(
            alphabet,
            alphabet.symbols().filter(|&a| a != 1).map(|a| stem.append_sym(a)),
        )
    }

    /// The cylinders of the decomposed set minus the limit, enumerated in
    /// shell order: head cylinders first (lexicographically), then regular
    /// shells with ascending `m` and ascending branch symbol.
    pub fn cylinders(&self) -> ShellCylinders<'_> {
        ShellCylinders { dec: self, head_idx: 0, m: 1, branch: 2 }
    }

    /// Number of head cylinders before the regular ladder begins.
    pub fn head_len(&self) -> usize {
        self.head.cylinders().len()
    }
}

/// Infinite iterator over shell cylinders in canonical order.
pub struct ShellCylinders<'a> {
    dec: &'a ShellDecomposition,
    head_idx: usize,
    m: usize,
    branch: u8,
}

impl Iterator for ShellCylinders<'_> {
    type Item = Word;

    fn next(&mut self) -> Option<Word> {
        let head = self.dec.head.cylinders();
        if self.head_idx < head.len() {
            self.head_idx += 1;
            return Some(head[self.head_idx - 1].clone());
        }
        let n = self.dec.head.alphabet().size();
        let stem = self
            .dec
            .ladder_base
            .concat(&self.dec.ladder.repeat(self.m - 1));
        let word = stem.append_sym(self.branch);
        if self.branch == n {
            self.branch = 2;
            self.m += 1;
        } else {
            self.branch += 1;
        }
        Some(word)
    }
}

/// Canonical shell decomposition of a nonempty clopen set.
pub fn canonical_shells(set: &ClopenSet) -> Result<ShellDecomposition, Error> {
    if set.is_empty() {
        return Err(Error::EmptyClopen);
    }
    let c1 = set.cylinders()[0].clone();
    let limit = Point::new(c1.clone(), Word::new(vec![1]))?;
    let head = set.difference(&ClopenSet::cylinder(set.alphabet(), c1.clone()));
    Ok(ShellDecomposition {
        limit,
        head,
        ladder_base: c1,
        ladder: Word::new(vec![1]),
        start_index: 1,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::Scalar;
    use crate::word::Alphabet;
    use num_rational::BigRational;

    fn ab(n: u8) -> Alphabet {
        Alphabet::new(n).unwrap()
    }

    fn w(s: &str) -> Word {
        Word::parse_digits(s).unwrap()
    }

    fn cs(n: u8, words: &[&str]) -> ClopenSet {
        ClopenSet::new(ab(n), words.iter().map(|s| w(s)))
    }

    #[test]
    fn shells_of_cylinder() {
        let d = canonical_shells(&cs(2, &["1"])).unwrap();
        assert_eq!(d.limit, Point::parse("|1").unwrap());
        assert!(d.head.is_empty());
        assert_eq!(d.regular_shell(1), cs(2, &["12"]));
        assert_eq!(d.regular_shell(3), cs(2, &["1112"]));
    }

    #[test]
    fn shells_of_whole_space() {
        let d = canonical_shells(&ClopenSet::whole(ab(2))).unwrap();
        assert_eq!(d.limit, Point::parse("|1").unwrap());
        assert!(d.head.is_empty());
        assert_eq!(d.regular_shell(1), cs(2, &["2"]));
        assert_eq!(d.regular_shell(2), cs(2, &["12"]));
    }

    #[test]
    fn shells_with_head() {
        let d = canonical_shells(&cs(2, &["12", "2"])).unwrap();
        assert_eq!(d.ladder_base, w("12"));
        assert_eq!(d.limit, Point::parse("12|1").unwrap());
        assert_eq!(d.head, cs(2, &["2"]));
        assert_eq!(d.regular_shell(1), cs(2, &["122"]));
        let first: Vec<Word> = d.cylinders().take(3).collect();
        assert_eq!(first, vec![w("2"), w("122"), w("1212")]);
    }

    #[test]
    fn shells_partition_and_shrink() {
        let set = cs(3, &["12", "13", "2"]);
        let d = canonical_shells(&set).unwrap();
        // Union of head and the first few shells plus deeper remainder
        // covers the set minus the limit; the shells are pairwise disjoint.
        let mut shells = vec![d.head.clone()];
        for m in 1..=4 {
            shells.push(d.regular_shell(m));
        }
        for (i, a) in shells.iter().enumerate() {
            assert!(!a.is_empty() || i == 0);
            for b in &shells[i + 1..] {
                assert!(a.is_disjoint_from(b));
            }
            assert!(a.is_subset_of(&set));
            assert!(!a.contains_point(&d.limit));
        }
        // Shell diameters strictly decrease along the regular ladder.
        let mut prev: Option<BigRational> = None;
        for m in 1..=5 {
            let dm: BigRational = d.regular_shell(m).diam().unwrap();
            if let Some(p) = prev {
                assert!(dm < p);
            }
            prev = Some(dm);
        }
        assert!(set.contains_point(&d.limit));
    }

    #[test]
    fn cylinder_enumeration_is_exhaustive() {
        // Every cylinder of the set eventually refines into enumerated
        // shell cylinders: spot-check that the enumeration covers the set
        // minus the limit up to depth 5.
        let set = cs(2, &["12", "2"]);
        let d = canonical_shells(&set).unwrap();
        let enumerated: Vec<Word> = d.cylinders().take(6).collect();
        let union = ClopenSet::new(ab(2), enumerated);
        let missing = set.difference(&union);
        // What is left is a single deep cylinder around the limit.
        assert_eq!(missing.cylinders().len(), 1);
        assert!(missing.contains_point(&d.limit));
        assert!(d.limit.starts_with(&missing.cylinders()[0]));
    }

    #[test]
    fn empty_set_rejected() {
        assert!(canonical_shells(&ClopenSet::empty(ab(2))).is_err());
    }
}
