//! Exact rule-system dynamics on one-sided shift spaces.
//!
//! The space is the set of one-sided sequences over `{1..N}` with the
//! `2^{-i}` ultrametric. Continuous maps between clopen subsets are
//! represented by finite systems of prefix-rewrite rules, which stay
//! exact under evaluation, composition, inversion and restriction. On
//! top of that the crate builds small perturbations of endomorphisms and
//! homeomorphisms whose orbits all become (finally) periodic, emits
//! machine-checkable certificates for those constructions, and computes
//! maximizing measures of locally constant observables over the
//! perturbed dynamics, cross-checked by a maximum mean cycle oracle.
//!
//! All arithmetic is exact: quantities are rationals behind the
//! [`scalar::Scalar`] trait, with machine-word and big-integer backends.

pub mod clopen;
pub mod ergopt;
pub mod error;
pub mod io;
pub mod map;
pub mod periodize;
pub mod point;
pub mod scalar;
pub mod shells;
pub mod verify;
pub mod word;

pub use clopen::{cylinder_partition_at_depth, depth_for_epsilon, ClopenSet};
pub use error::{Error, Result};
pub use map::{CantorMap, Rule, TowerRule};
pub use point::{metric_d, Point};
pub use scalar::Scalar;
pub use shells::{canonical_shells, ShellDecomposition};
pub use word::{lcp, Alphabet, Word};

/// Machine-word exact rational; fine for shallow computations.
pub type Rat64 = num_rational::Rational64;

/// Arbitrary-precision exact rational; the default for accumulating
/// computations (averages, cycle means, distances at depth).
pub type BigRat = num_rational::BigRational;
