//! Perturbation of surjections: every orbit of the output is finally
//! periodic.
//!
//! The basic construction applies when every piece has a cell returning
//! into itself: the lexicographically first cylinder of
//! `K_i ∩ T^{-1}(K_i)` becomes a draining ladder `k_i R_i -> k_i`, and
//! everything else labeled `i` collapses to the ladder's fixed point
//! `k_i R_i^inf`. When some piece never returns, it is bypassed: its
//! inbound mass is rerouted through paired homeomorphisms onto its
//! outbound classes, the piece count drops by one, and the construction
//! recurses.

use crate::clopen::ClopenSet;
use crate::error::{Error, Result};
use crate::map::algebra::compose;
use crate::map::homeo::canonical_homeo;
use crate::map::{CantorMap, Rule};
use crate::point::Point;
use crate::word::Word;

use super::{piece_preimages, Certificate, LemmaWitness, Mode, Pairing, RecursionNode};

/// The basic construction. Fails when some piece has no self-returning
/// cell (the caller must recurse instead).
pub fn lemma31(map: &CantorMap, pieces: &[Word]) -> Result<(CantorMap, Certificate)> {
    let alphabet = map.alphabet();
    let pres = piece_preimages(map, pieces)?;
    let mut witnesses = Vec::with_capacity(pieces.len());
    for (piece, pre) in pieces.iter().zip(&pres) {
        let cell = ClopenSet::cylinder(alphabet, piece.clone());
        let staying = cell.intersection(pre);
        let witness_cell = staying
            .cylinders()
            .first()
            .cloned()
            .ok_or_else(|| {
                Error::Construction(format!("piece [{piece}] has no self-returning cell"))
            })?;
        let forcing = witness_cell.strip_prefix(piece).expect("witness inside piece");
        let fixed_point = if forcing.is_empty() {
            // The whole piece maps into itself and is left as the
            // identity; its canonical fixed point anchors collapses.
            Point::new(piece.clone(), Word::new(vec![1]))?
        } else {
            Point::new(piece.clone(), forcing.clone())?
        };
        witnesses.push(LemmaWitness {
            piece: piece.clone(),
            cell: witness_cell,
            forcing,
            fixed_point,
        });
    }
    let mut rules = Vec::new();
    for (w, pre) in witnesses.iter().zip(&pres) {
        // The draining ladder (the identity on the piece when the forcing
        // word is empty).
        rules.push(Rule::Transport { src: w.cell.clone(), dst: w.piece.clone() });
        // Everything else heading into this piece collapses onto the
        // ladder's fixed point.
        let witness_cyl = ClopenSet::cylinder(alphabet, w.cell.clone());
        for c in pre.difference(&witness_cyl).cylinders() {
            rules.push(Rule::Collapse { src: c.clone(), value: w.fixed_point.clone() });
        }
    }
    let tilde = CantorMap::new(
        alphabet,
        map.domain().clone(),
        map.codomain().clone(),
        rules,
    )?
    .simplify();
    let cert = Certificate::EndoLemma { pieces: pieces.to_vec(), witnesses };
    Ok((tilde, cert))
}

/// Splits the last member of the smaller family until the counts match.
pub(super) fn equalize(
    us: &mut Vec<(usize, ClopenSet)>,
    vs: &mut Vec<(usize, ClopenSet)>,
) -> Result<()> {
    let split_last = |fam: &mut Vec<(usize, ClopenSet)>| -> Result<()> {
        let (idx, set) = fam.pop().expect("nonempty family");
        let parts = set.split(2)?;
        fam.push((idx, parts[0].clone()));
        fam.push((idx, parts[1].clone()));
        Ok(())
    };
    while us.len() < vs.len() {
        split_last(us)?;
    }
    while vs.len() < us.len() {
        split_last(vs)?;
    }
    Ok(())
}

/// Restriction that also narrows the codomain, for glueing.
fn restricted(map: &CantorMap, set: &ClopenSet) -> Result<CantorMap> {
    map.restrict(set)
}

/// Perturbs a surjection of the union of the pieces so every orbit is
/// finally periodic while the piece itinerary is preserved.
pub fn periodize_endo(map: &CantorMap, pieces: &[Word]) -> Result<(CantorMap, Certificate)> {
    let alphabet = map.alphabet();
    if pieces.is_empty() {
        return Err(Error::BadPartition);
    }
    if pieces.len() == 1 {
        let tilde = CantorMap::identity(map.domain());
        return Ok((tilde, Certificate::Identity { pieces: pieces.to_vec() }));
    }
    let pres = piece_preimages(map, pieces)?;
    let self_returning = |i: usize| {
        !ClopenSet::cylinder(alphabet, pieces[i].clone())
            .intersection(&pres[i])
            .is_empty()
    };
    if (0..pieces.len()).all(self_returning) {
        return lemma31(map, pieces);
    }
    let j = (0..pieces.len()).find(|&i| !self_returning(i)).unwrap();
    let piece_j = ClopenSet::cylinder(alphabet, pieces[j].clone());
    let pre_j = &pres[j];

    // Outbound classes of the bypassed piece, by image piece; inbound
    // classes of its preimage, by source piece.
    let mut vs: Vec<(usize, ClopenSet)> = Vec::new();
    let mut us: Vec<(usize, ClopenSet)> = Vec::new();
    for (i, piece) in pieces.iter().enumerate() {
        if i == j {
            continue;
        }
        let v = piece_j.intersection(&pres[i]);
        if !v.is_empty() {
            vs.push((i, v));
        }
        let u = ClopenSet::cylinder(alphabet, piece.clone()).intersection(pre_j);
        if !u.is_empty() {
            us.push((i, u));
        }
    }
    if us.is_empty() || vs.is_empty() {
        return Err(Error::Construction(
            "bypassed piece has no inbound or outbound mass (map not surjective?)".into(),
        ));
    }
    equalize(&mut us, &mut vs)?;
    let mut pairs = Vec::with_capacity(us.len());
    for ((_, u), (_, v)) in us.iter().zip(&vs) {
        let h = canonical_homeo(u, v)?;
        pairs.push(Pairing { u: u.clone(), v: v.clone(), homeo: h });
    }

    // The inner map g on the complement of the bypassed piece: unchanged
    // off the preimage, and T after the pairing homeomorphism on it.
    let rest = map.domain().difference(&piece_j);
    let away = rest.difference(pre_j);
    let mut parts: Vec<CantorMap> = Vec::new();
    if !away.is_empty() {
        parts.push(restricted(map, &away)?);
    }
    for p in &pairs {
        let t_on_v = restricted(map, &p.v)?;
        parts.push(compose(&t_on_v, &p.homeo)?);
    }
    let part_refs: Vec<&CantorMap> = parts.iter().collect();
    let inner = CantorMap::glue(&part_refs, rest.clone(), rest.clone())?.simplify();
    crate::map::machine::ensure_valid(&inner)?;

    let child_pieces: Vec<Word> = pieces
        .iter()
        .enumerate()
        .filter(|(i, _)| *i != j)
        .map(|(_, w)| w.clone())
        .collect();
    let (inner_tilde, child) = periodize_endo(&inner, &child_pieces)?;

    // Reassemble: the inner perturbation away from the bypassed piece and
    // its preimage, the pairings on the preimage, and the inner
    // perturbation pulled through the inverse pairings on the piece.
    let mut parts: Vec<CantorMap> = Vec::new();
    if !away.is_empty() {
        parts.push(restricted(&inner_tilde, &away)?);
    }
    for p in &pairs {
        parts.push(p.homeo.clone());
        let gt_on_u = restricted(&inner_tilde, &p.u)?;
        parts.push(compose(&gt_on_u, &p.homeo.invert()?)?);
    }
    let part_refs: Vec<&CantorMap> = parts.iter().collect();
    let tilde =
        CantorMap::glue(&part_refs, map.domain().clone(), map.codomain().clone())?.simplify();
    let node = RecursionNode {
        pieces: pieces.to_vec(),
        removed: pieces[j].clone(),
        staying: None,
        pairs,
        inner,
        inner_tilde,
        child: Box::new(child),
    };
    Ok((tilde, Certificate::Recursion(Mode::Endo, node)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::map::examples::*;
    use crate::map::distance::{exact_distance, itinerary_respects};
    use crate::map::machine::{ensure_valid, is_surjective};
    use crate::BigRat;
    use crate::Scalar;

    fn w(s: &str) -> Word {
        Word::parse_digits(s).unwrap()
    }

    fn pt(s: &str) -> Point {
        Point::parse(s).unwrap()
    }

    fn depth1(n: u8) -> Vec<Word> {
        crate::clopen::cylinder_partition_at_depth(ab(n), 1)
    }

    #[test]
    fn lemma_on_the_shift_reproduces_the_four_rules() {
        let (tilde, cert) = lemma31(&shift2(), &depth1(2)).unwrap();
        let expected = vec![
            Rule::transport(w("11"), w("1")),
            Rule::transport(w("22"), w("2")),
            Rule::Collapse { src: w("12"), value: pt("|2") },
            Rule::Collapse { src: w("21"), value: pt("|1") },
        ];
        let mut got = tilde.rules().to_vec();
        got.sort_by_key(|r| r.sort_key());
        let mut expected = expected;
        expected.sort_by_key(|r| r.sort_key());
        assert_eq!(got, expected);
        match &cert {
            Certificate::EndoLemma { witnesses, .. } => {
                assert_eq!(witnesses[0].forcing, w("1"));
                assert_eq!(witnesses[1].forcing, w("2"));
                assert_eq!(witnesses[0].fixed_point, pt("|1"));
            }
            _ => panic!("expected the basic certificate"),
        }
        ensure_valid(&tilde).unwrap();
        assert!(is_surjective(&tilde));
        assert!(itinerary_respects(&shift2(), &tilde, &depth1(2)).unwrap());
        let d: BigRat = exact_distance(&shift2(), &tilde).unwrap();
        assert_eq!(d, BigRat::from_ratio(1, 4));
    }

    #[test]
    fn lemma_on_the_identity_is_the_identity() {
        let (tilde, _) = lemma31(&identity_global(2), &depth1(2)).unwrap();
        let d: BigRat = exact_distance(&identity_global(2), &tilde).unwrap();
        assert_eq!(d, BigRat::from_i64(0));
    }

    #[test]
    fn lemma_orbit_reaches_the_fixed_point() {
        let (tilde, _) = lemma31(&shift2(), &depth1(2)).unwrap();
        // 1112|2 -> 112|2 -> 12|2 -> |2 (fixed).
        let mut x = pt("1112|2");
        let expected = [pt("112|2"), pt("12|2"), pt("|2"), pt("|2")];
        for e in expected {
            x = tilde.evaluate(&x).unwrap();
            assert_eq!(x, e);
        }
    }

    #[test]
    fn lemma_fails_without_self_return() {
        assert!(lemma31(&swap2(), &depth1(2)).is_err());
        assert!(lemma31(&cycle(3), &depth1(3)).is_err());
    }

    #[test]
    fn recursion_handles_the_three_cycle() {
        let t = cycle(3);
        let pieces = depth1(3);
        let (tilde, cert) = periodize_endo(&t, &pieces).unwrap();
        ensure_valid(&tilde).unwrap();
        assert!(is_surjective(&tilde));
        assert!(itinerary_respects(&t, &tilde, &pieces).unwrap());
        assert!(matches!(cert, Certificate::Recursion(Mode::Endo, _)));
        // Orbits become exactly periodic within a small bound.
        for s in ["|1", "|2", "|3", "12|3", "321|12", "2|13"] {
            let mut x = pt(s);
            let mut seen = vec![x.clone()];
            let mut cycled = false;
            for _ in 0..64 {
                x = tilde.evaluate(&x).unwrap();
                if seen.contains(&x) {
                    cycled = true;
                    break;
                }
                seen.push(x.clone());
            }
            assert!(cycled, "orbit of {s} did not close");
        }
    }

    #[test]
    fn single_piece_is_identity() {
        let (tilde, cert) = periodize_endo(&shift2(), &[Word::empty()]).unwrap();
        assert!(matches!(cert, Certificate::Identity { .. }));
        let d: BigRat = exact_distance(&identity_global(2), &tilde).unwrap();
        assert_eq!(d, BigRat::from_i64(0));
    }

    #[test]
    fn deeper_partitions_on_the_shift() {
        let pieces = crate::clopen::cylinder_partition_at_depth(ab(2), 2);
        let t = shift2();
        let (tilde, _) = periodize_endo(&t, &pieces).unwrap();
        ensure_valid(&tilde).unwrap();
        assert!(is_surjective(&tilde));
        assert!(itinerary_respects(&t, &tilde, &pieces).unwrap());
        let d: BigRat = exact_distance(&t, &tilde).unwrap();
        assert!(d <= BigRat::half_pow(3));
    }
}
