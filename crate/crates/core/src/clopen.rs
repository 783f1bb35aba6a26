//! Clopen subsets of the shift space as canonical finite cylinder unions.
//!
//! The canonical form is prefix-free (no cylinder word is a prefix of
//! another) and fully merged (no word has all `N` one-symbol extensions
//! present), which makes equality a plain list comparison.

use std::collections::BTreeMap;
use std::fmt;

use crate::error::Error;
use crate::point::Point;
use crate::scalar::Scalar;
use crate::word::{lcp, Alphabet, Word};

#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ClopenSet {
    alphabet: Alphabet,
    /// Sorted, prefix-free, fully merged.
    cylinders: Vec<Word>,
}

#[derive(Default)]
struct TrieNode {
    covered: bool,
    children: BTreeMap<u8, TrieNode>,
}

impl TrieNode {
    fn insert(&mut self, w: &[u8]) {
        if self.covered {
            return;
        }
        match w.split_first() {
            None => {
                self.covered = true;
                self.children.clear();
            }
            Some((&a, rest)) => self.children.entry(a).or_default().insert(rest),
        }
    }

    /// Marks a node covered when all `n` children are covered, bottom-up.
    fn merge(&mut self, n: u8) {
        if self.covered {
            return;
        }
        for c in self.children.values_mut() {
            c.merge(n);
        }
        if self.children.len() == n as usize && self.children.values().all(|c| c.covered) {
            self.covered = true;
            self.children.clear();
        }
    }

    fn collect(&self, prefix: &mut Vec<u8>, out: &mut Vec<Word>) {
        if self.covered {
            out.push(Word::from_syms(prefix));
            return;
        }
        for (&a, c) in &self.children {
            prefix.push(a);
            c.collect(prefix, out);
            prefix.pop();
        }
    }

    /// Cylinders of the complement: every missing branch off the trie.
    fn complement(&self, n: u8, prefix: &mut Vec<u8>, out: &mut Vec<Word>) {
        if self.covered {
            return;
        }
        if self.children.is_empty() {
            out.push(Word::from_syms(prefix));
            return;
        }
        for a in 1..=n {
            prefix.push(a);
            match self.children.get(&a) {
                Some(c) => c.complement(n, prefix, out),
                None => out.push(Word::from_syms(prefix)),
            }
            prefix.pop();
        }
    }
}

impl ClopenSet {
    /// Canonical union of the given cylinders.
    pub fn new(alphabet: Alphabet, words: impl IntoIterator<Item = Word>) -> Self {
        let mut root = TrieNode::default();
        for w in words {
            debug_assert!(w.in_alphabet(alphabet), "symbol outside alphabet");
            root.insert(w.syms());
        }
        root.merge(alphabet.size());
        let mut cylinders = Vec::new();
        root.collect(&mut Vec::new(), &mut cylinders);
        ClopenSet { alphabet, cylinders }
    }

    pub fn empty(alphabet: Alphabet) -> Self {
        ClopenSet { alphabet, cylinders: Vec::new() }
    }

    pub fn whole(alphabet: Alphabet) -> Self {
        ClopenSet::new(alphabet, [Word::empty()])
    }

    pub fn cylinder(alphabet: Alphabet, w: Word) -> Self {
        ClopenSet::new(alphabet, [w])
    }

    pub fn alphabet(&self) -> Alphabet {
        self.alphabet
    }

    pub fn cylinders(&self) -> &[Word] {
        &self.cylinders
    }

    pub fn is_empty(&self) -> bool {
        self.cylinders.is_empty()
    }

    pub fn is_whole(&self) -> bool {
        self.cylinders.len() == 1 && self.cylinders[0].is_empty()
    }

    pub fn contains_point(&self, x: &Point) -> bool {
        self.cylinders.iter().any(|w| x.starts_with(w))
    }

    /// Whether the cylinder `[w]` is entirely inside this set.
    pub fn contains_cylinder(&self, w: &Word) -> bool {
        self.cylinders.iter().any(|c| c.is_prefix_of(w))
    }

    /// Whether the cylinder `[w]` meets this set.
    pub fn intersects_cylinder(&self, w: &Word) -> bool {
        self.cylinders.iter().any(|c| c.comparable(w))
    }

    pub fn union(&self, other: &ClopenSet) -> ClopenSet {
        debug_assert_eq!(self.alphabet, other.alphabet);
        ClopenSet::new(
            self.alphabet,
            self.cylinders.iter().chain(&other.cylinders).cloned(),
        )
    }

    pub fn intersection(&self, other: &ClopenSet) -> ClopenSet {
        debug_assert_eq!(self.alphabet, other.alphabet);
        let mut words = Vec::new();
        for a in &self.cylinders {
            for b in &other.cylinders {
                if a.is_prefix_of(b) {
                    words.push(b.clone());
                } else if b.is_prefix_of(a) {
                    words.push(a.clone());
                }
            }
        }
        ClopenSet::new(self.alphabet, words)
    }

    pub fn complement(&self) -> ClopenSet {
        let mut root = TrieNode::default();
        for w in &self.cylinders {
            root.insert(w.syms());
        }
        let mut out = Vec::new();
        root.complement(self.alphabet.size(), &mut Vec::new(), &mut out);
        ClopenSet::new(self.alphabet, out)
    }

    pub fn difference(&self, other: &ClopenSet) -> ClopenSet {
        self.intersection(&other.complement())
    }

    pub fn is_subset_of(&self, other: &ClopenSet) -> bool {
        self.difference(other).is_empty()
    }

    pub fn is_disjoint_from(&self, other: &ClopenSet) -> bool {
        self.intersection(other).is_empty()
    }

    /// The set `{t : [v . t] contained in self}` as a clopen set: the part
    /// of `self` seen below the word `v`, with `v` stripped.
    pub fn quotient(&self, v: &Word) -> ClopenSet {
        let mut words = Vec::new();
        for c in &self.cylinders {
            if c.is_prefix_of(v) {
                return ClopenSet::whole(self.alphabet);
            }
            if let Some(t) = c.strip_prefix(v) {
                words.push(t);
            }
        }
        ClopenSet::new(self.alphabet, words)
    }

    /// Prepends `v` to every cylinder: the image of the set under
    /// `t -> v.t`.
    pub fn prepend(&self, v: &Word) -> ClopenSet {
        ClopenSet::new(self.alphabet, self.cylinders.iter().map(|c| v.concat(c)))
    }

    /// Exact diameter under the `2^{-i}` metric.
    pub fn diam<R: Scalar>(&self) -> Result<R, Error> {
        if self.is_empty() {
            return Err(Error::EmptyClopen);
        }
        if self.cylinders.len() == 1 {
            // sup distance inside one cylinder: first free position.
            return Ok(R::half_pow(self.cylinders[0].len() + 1));
        }
        // Canonical form is sorted, so the minimal pairwise lcp is attained
        // by an adjacent pair.
        let min_lcp = self
            .cylinders
            .windows(2)
            .map(|p| lcp(&p[0], &p[1]))
            .min()
            .unwrap();
        Ok(R::half_pow(min_lcp + 1))
    }

    /// Splits into `n` disjoint nonempty clopen pieces whose union is the
    /// set: repeatedly splits the lexicographically first cylinder into its
    /// children until at least `n` cylinders exist, then groups consecutive
    /// cylinders evenly.
    pub fn split(&self, n: usize) -> Result<Vec<ClopenSet>, Error> {
        if self.is_empty() {
            return Err(Error::EmptyClopen);
        }
        if n == 0 {
            return Err(Error::BadPartition);
        }
        let mut cyls = self.cylinders.clone();
        while cyls.len() < n {
            let first = cyls.remove(0);
            for a in self.alphabet.symbols().rev() {
                cyls.insert(0, first.append_sym(a));
            }
            cyls.sort();
        }
        // Distribute the cylinders into n consecutive groups, sizes as even
        // as possible (the first rem groups get one extra).
        let total = cyls.len();
        let base = total / n;
        let rem = total % n;
        let mut out = Vec::with_capacity(n);
        let mut idx = 0;
        for g in 0..n {
            let size = base + usize::from(g < rem);
            let group: Vec<Word> = cyls[idx..idx + size].to_vec();
            idx += size;
            out.push(ClopenSet::new(self.alphabet, group));
        }
        Ok(out)
    }

    /// Largest cylinder word length in canonical form; 0 for the whole
    /// space and the empty set.
    pub fn max_depth(&self) -> usize {
        self.cylinders.iter().map(|c| c.len()).max().unwrap_or(0)
    }
}

impl fmt::Debug for ClopenSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{{")?;
        for (i, c) in self.cylinders.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "[{}]", c)?;
        }
        write!(f, "}}")
    }
}

/// Smallest depth `k >= 1` with `2^{-(k+1)} < eps`.
pub fn depth_for_epsilon<R: Scalar>(eps: &R) -> Result<usize, Error> {
    if *eps <= R::zero() {
        return Err(Error::NonPositiveEpsilon);
    }
    let mut k = 1usize;
    while R::half_pow(k + 1) >= *eps {
        k += 1;
    }
    Ok(k)
}

/// All depth-`k` cylinder words in lexicographic order.
pub fn cylinder_partition_at_depth(alphabet: Alphabet, k: usize) -> Vec<Word> {
    alphabet.words_of_len(k)
}
