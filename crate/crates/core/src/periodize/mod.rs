//! Perturbation of endomorphisms and homeomorphisms into maps whose
//! orbits all become (finally) periodic, preserving the piece itinerary
//! against a cylinder partition. Every construction returns a
//! certificate recording the choices made, which the verifier replays.

pub mod endo;
pub mod homeo;

use crate::clopen::{cylinder_partition_at_depth, depth_for_epsilon, ClopenSet};
use crate::error::{Error, Result};
use crate::map::machine::{self, preimage};
use crate::map::{CantorMap, TowerRule};
use crate::point::Point;
use crate::scalar::Scalar;
use crate::word::Word;

pub use endo::{lemma31, periodize_endo};
pub use homeo::{lemma41, periodize_homeo};

/// Which construction family produced a perturbation.
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum Mode {
    Endo,
    Homeo,
}

/// Per-piece data of the basic endomorphism construction: the witness
/// cell `piece . forcing` whose image stays in the piece, and the fixed
/// point `piece . forcing^inf` that everything labeled with this piece
/// collapses to.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LemmaWitness {
    pub piece: Word,
    pub cell: Word,
    pub forcing: Word,
    pub fixed_point: Point,
}

/// Classification of a piece under a homeomorphism.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum PieceClass {
    /// Forward and backward invariant: left pointwise fixed.
    Invariant { piece: Word },
    /// Backward invariant only: mass drains through the staying set and
    /// exits into sinks.
    Source { piece: Word, staying: ClopenSet, exits: ClopenSet },
    /// Forward invariant only: mass enters the vacated first shell.
    Sink { piece: Word, entry: ClopenSet },
}

/// One matched pair of the recursion step: `homeo` maps `u` onto `v`.
#[derive(Clone, Debug)]
pub struct Pairing {
    pub u: ClopenSet,
    pub v: ClopenSet,
    pub homeo: CantorMap,
}

/// The recursion node: piece `removed` is bypassed, the inner map `g`
/// on the remaining pieces is periodized recursively, and the result is
/// reassembled through the pairings.
#[derive(Clone, Debug)]
pub struct RecursionNode {
    pub pieces: Vec<Word>,
    pub removed: Word,
    /// The set staying inside the removed piece (homeomorphism case only;
    /// it is left pointwise fixed).
    pub staying: Option<ClopenSet>,
    pub pairs: Vec<Pairing>,
    pub inner: CantorMap,
    pub inner_tilde: CantorMap,
    pub child: Box<Certificate>,
}

/// The recursion tree recording every construction choice.
#[derive(Clone, Debug)]
pub enum Certificate {
    /// The map was replaced by the identity on these pieces.
    Identity { pieces: Vec<Word> },
    /// Basic endomorphism construction: witness ladders and collapses.
    EndoLemma { pieces: Vec<Word>, witnesses: Vec<LemmaWitness> },
    /// Basic homeomorphism construction: invariant pieces fixed, sources
    /// drained, sinks absorbing.
    HomeoLemma {
        pieces: Vec<Word>,
        classes: Vec<PieceClass>,
        fixed_points: Vec<Point>,
        inward_towers: Vec<TowerRule>,
        outward_towers: Vec<TowerRule>,
    },
    Recursion(Mode, RecursionNode),
}

impl Certificate {
    pub fn mode(&self) -> Mode {
        match self {
            Certificate::Identity { .. } => Mode::Endo,
            Certificate::EndoLemma { .. } => Mode::Endo,
            Certificate::HomeoLemma { .. } => Mode::Homeo,
            Certificate::Recursion(m, _) => *m,
        }
    }

    pub fn pieces(&self) -> &[Word] {
        match self {
            Certificate::Identity { pieces } => pieces,
            Certificate::EndoLemma { pieces, .. } => pieces,
            Certificate::HomeoLemma { pieces, .. } => pieces,
            Certificate::Recursion(_, node) => &node.pieces,
        }
    }

    /// All fixed points this certificate claims, across the whole tree.
    pub fn claimed_fixed_points(&self) -> Vec<Point> {
        let mut out = Vec::new();
        match self {
            Certificate::Identity { .. } => {}
            Certificate::EndoLemma { witnesses, .. } => {
                out.extend(witnesses.iter().map(|w| w.fixed_point.clone()));
            }
            Certificate::HomeoLemma { fixed_points, .. } => out.extend(fixed_points.clone()),
            Certificate::Recursion(_, node) => out.extend(node.child.claimed_fixed_points()),
        }
        out.sort();
        out.dedup();
        out
    }

    pub fn depth(&self) -> usize {
        match self {
            Certificate::Recursion(_, node) => 1 + node.child.depth(),
            _ => 0,
        }
    }
}

/// The exact preimage of each piece; for a valid map these partition the
/// domain.
pub fn piece_preimages(map: &CantorMap, pieces: &[Word]) -> Result<Vec<ClopenSet>> {
    pieces
        .iter()
        .map(|p| preimage(map, &ClopenSet::cylinder(map.alphabet(), p.clone())))
        .collect()
}

/// Result of the top-level perturbation driver.
pub struct Perturbation<R> {
    pub tilde: CantorMap,
    pub certificate: Certificate,
    pub pieces: Vec<Word>,
    pub depth: usize,
    /// `2^{-(depth+1)}`, the piece diameter bounding the distance.
    pub bound: R,
    pub distance: R,
}

/// Perturbs a global surjection (endo) or homeomorphism (homeo) of the
/// whole space at scale `eps`: the result respects the itinerary against
/// the depth-`k` cylinder partition, so its distance to the input is at
/// most `2^{-(k+1)} < eps`.
pub fn perturb<R: Scalar>(map: &CantorMap, eps: &R, mode: Mode) -> Result<Perturbation<R>> {
    if !map.domain().is_whole() || !map.codomain().is_whole() {
        return Err(Error::DomainMismatch(
            "perturbation expects a self-map of the whole space".into(),
        ));
    }
    machine::ensure_valid(map)?;
    match mode {
        Mode::Endo => {
            if !machine::is_surjective(map) {
                return Err(Error::NotSurjective);
            }
        }
        Mode::Homeo => {
            if !machine::is_surjective(map) || !machine::is_injective(map) {
                return Err(Error::NotHomeomorphism);
            }
        }
    }
    let k = depth_for_epsilon(eps)?;
    let pieces = cylinder_partition_at_depth(map.alphabet(), k);
    let (tilde, certificate) = match mode {
        Mode::Endo => periodize_endo(map, &pieces)?,
        Mode::Homeo => periodize_homeo(map, &pieces)?,
    };
    let bound = R::half_pow(k + 1);
    let distance: R = crate::map::distance::exact_distance(map, &tilde)?;
    if distance > bound {
        return Err(Error::Construction(format!(
            "perturbation distance {distance} exceeds the piece diameter {bound}"
        )));
    }
    Ok(Perturbation { tilde, certificate, pieces, depth: k, bound, distance })
}
