//! Perturbation of homeomorphisms: the omega-limit of every orbit of the
//! output is a periodic orbit.
//!
//! The basic construction applies when every piece is forward or
//! backward invariant. Invariant pieces are left pointwise fixed. A
//! source piece (backward invariant only) drains: its staying set is
//! peeled into shells sliding toward the exit sets, with the shell limit
//! fixed. A sink piece (forward invariant only) absorbs: its shells
//! slide away from the vacated first shell, which receives the entering
//! mass, and every entering orbit converges to the shell limit. When a
//! piece is neither, it is bypassed exactly as in the endomorphism
//! recursion, with the set staying inside it left pointwise fixed.

use crate::clopen::ClopenSet;
use crate::error::{Error, Result};
use crate::map::algebra::compose;
use crate::map::homeo::canonical_homeo;
use crate::map::machine;
use crate::map::{CantorMap, Rule, TowerRule};
use crate::point::Point;
use crate::shells::canonical_shells;
use crate::word::Word;

use super::{piece_preimages, Certificate, Mode, Pairing, PieceClass, RecursionNode};

/// The inward tower on the regular shells of a shell decomposition:
/// shell `m+1` slides to shell `m`.
fn inward_tower(base: &Word, alphabet: crate::word::Alphabet) -> TowerRule {
    TowerRule {
        src_base: base.clone(),
        src_ladder: Word::new(vec![1]),
        branches: alphabet
            .symbols()
            .filter(|&a| a != 1)
            .map(|a| (Word::new(vec![a]), Word::new(vec![a])))
            .collect(),
        start: 1,
        offset: -1,
        dst_base: base.clone(),
        dst_ladder: Word::new(vec![1]),
    }
}

/// The outward tower: shell `m` slides to shell `m+1`.
fn outward_tower(base: &Word, alphabet: crate::word::Alphabet) -> TowerRule {
    TowerRule {
        src_base: base.clone(),
        src_ladder: Word::new(vec![1]),
        branches: alphabet
            .symbols()
            .filter(|&a| a != 1)
            .map(|a| (Word::new(vec![a]), Word::new(vec![a])))
            .collect(),
        start: 0,
        offset: 1,
        dst_base: base.clone(),
        dst_ladder: Word::new(vec![1]),
    }
}

/// The basic construction. Fails when some piece is neither forward nor
/// backward invariant (the caller must recurse instead).
pub fn lemma41(map: &CantorMap, pieces: &[Word]) -> Result<(CantorMap, Certificate)> {
    let alphabet = map.alphabet();
    let pres = piece_preimages(map, pieces)?;
    let mut classes = Vec::with_capacity(pieces.len());
    for (piece, pre) in pieces.iter().zip(&pres) {
        let cell = ClopenSet::cylinder(alphabet, piece.clone());
        let fwd = cell.is_subset_of(pre);
        let bwd = pre.is_subset_of(&cell);
        classes.push(match (fwd, bwd) {
            (true, true) => PieceClass::Invariant { piece: piece.clone() },
            (false, true) => PieceClass::Source {
                piece: piece.clone(),
                staying: pre.clone(),
                exits: cell.difference(pre),
            },
            (true, false) => PieceClass::Sink {
                piece: piece.clone(),
                entry: pre.difference(&cell),
            },
            (false, false) => {
                return Err(Error::Construction(format!(
                    "piece [{piece}] is neither forward nor backward invariant"
                )))
            }
        });
    }
    let n_sources = classes.iter().filter(|c| matches!(c, PieceClass::Source { .. })).count();
    let n_sinks = classes.iter().filter(|c| matches!(c, PieceClass::Sink { .. })).count();
    if (n_sources == 0) != (n_sinks == 0) {
        return Err(Error::Construction(
            "sources without sinks (or vice versa): mass cannot balance".into(),
        ));
    }

    let mut rules: Vec<Rule> = Vec::new();
    let mut fixed_points: Vec<Point> = Vec::new();
    let mut inward: Vec<TowerRule> = Vec::new();
    let mut outward: Vec<TowerRule> = Vec::new();

    for class in &classes {
        match class {
            PieceClass::Invariant { piece } => {
                rules.push(Rule::Transport { src: piece.clone(), dst: piece.clone() });
            }
            PieceClass::Source { staying, exits, .. } => {
                let sd = canonical_shells(staying)?;
                // Stations drain from the first regular shell through the
                // head cylinders into the exit sets.
                let mut stations: Vec<ClopenSet> = vec![exits.clone()];
                for h in sd.head.cylinders() {
                    stations.push(ClopenSet::cylinder(alphabet, h.clone()));
                }
                stations.push(sd.regular_shell(1));
                for pair in stations.windows(2) {
                    let h = canonical_homeo(&pair[1], &pair[0])?;
                    rules.extend(h.rules().iter().cloned());
                }
                let tower = inward_tower(&sd.ladder_base, alphabet);
                rules.push(Rule::Tower(tower.clone()));
                inward.push(tower);
                rules.push(Rule::PointRule { src: sd.limit.clone(), dst: sd.limit.clone() });
                fixed_points.push(sd.limit);
            }
            PieceClass::Sink { piece, entry } => {
                let cell = ClopenSet::cylinder(alphabet, piece.clone());
                let sd = canonical_shells(&cell)?;
                debug_assert!(sd.head.is_empty(), "a cylinder piece has no head shells");
                let h = canonical_homeo(entry, &sd.regular_shell(1))?;
                rules.extend(h.rules().iter().cloned());
                let tower = outward_tower(&sd.ladder_base, alphabet);
                rules.push(Rule::Tower(tower.clone()));
                outward.push(tower);
                rules.push(Rule::PointRule { src: sd.limit.clone(), dst: sd.limit.clone() });
                fixed_points.push(sd.limit);
            }
        }
    }
    let tilde =
        CantorMap::new(alphabet, map.domain().clone(), map.codomain().clone(), rules)?.simplify();
    let cert = Certificate::HomeoLemma {
        pieces: pieces.to_vec(),
        classes,
        fixed_points,
        inward_towers: inward,
        outward_towers: outward,
    };
    Ok((tilde, cert))
}

/// Perturbs a homeomorphism of the union of the pieces so the
/// omega-limit of every orbit is a periodic orbit, preserving the piece
/// itinerary.
pub fn periodize_homeo(map: &CantorMap, pieces: &[Word]) -> Result<(CantorMap, Certificate)> {
    let alphabet = map.alphabet();
    if pieces.is_empty() {
        return Err(Error::BadPartition);
    }
    if pieces.len() == 1 {
        let tilde = CantorMap::identity(map.domain());
        return Ok((tilde, Certificate::Identity { pieces: pieces.to_vec() }));
    }
    let pres = piece_preimages(map, pieces)?;
    let class_ok = |i: usize| {
        let cell = ClopenSet::cylinder(alphabet, pieces[i].clone());
        cell.is_subset_of(&pres[i]) || pres[i].is_subset_of(&cell)
    };
    if (0..pieces.len()).all(class_ok) {
        return lemma41(map, pieces);
    }
    let j = (0..pieces.len()).find(|&i| !class_ok(i)).unwrap();
    let piece_j = ClopenSet::cylinder(alphabet, pieces[j].clone());
    let pre_j = &pres[j];
    let staying = piece_j.intersection(pre_j);

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
            "bypassed piece has no inbound or outbound mass (map not bijective?)".into(),
        ));
    }
    super::endo::equalize(&mut us, &mut vs)?;
    let mut pairs = Vec::with_capacity(us.len());
    for ((_, u), (_, v)) in us.iter().zip(&vs) {
        let h = canonical_homeo(u, v)?;
        pairs.push(Pairing { u: u.clone(), v: v.clone(), homeo: h });
    }

    let rest = map.domain().difference(&piece_j);
    let u_side = pre_j.difference(&piece_j);
    let away = rest.difference(&u_side);
    let mut parts: Vec<CantorMap> = Vec::new();
    if !away.is_empty() {
        parts.push(map.restrict(&away)?);
    }
    for p in &pairs {
        let t_on_v = map.restrict(&p.v)?;
        parts.push(compose(&t_on_v, &p.homeo)?);
    }
    let part_refs: Vec<&CantorMap> = parts.iter().collect();
    let inner = CantorMap::glue(&part_refs, rest.clone(), rest.clone())?.simplify();
    machine::ensure_valid(&inner)?;

    let child_pieces: Vec<Word> = pieces
        .iter()
        .enumerate()
        .filter(|(i, _)| *i != j)
        .map(|(_, w)| w.clone())
        .collect();
    let (inner_tilde, child) = periodize_homeo(&inner, &child_pieces)?;

    let mut parts: Vec<CantorMap> = Vec::new();
    if !away.is_empty() {
        parts.push(inner_tilde.restrict(&away)?);
    }
    if !staying.is_empty() {
        parts.push(CantorMap::identity(&staying));
    }
    for p in &pairs {
        parts.push(p.homeo.clone());
        let gt_on_u = inner_tilde.restrict(&p.u)?;
        parts.push(compose(&gt_on_u, &p.homeo.invert()?)?);
    }
    let part_refs: Vec<&CantorMap> = parts.iter().collect();
    let tilde =
        CantorMap::glue(&part_refs, map.domain().clone(), map.codomain().clone())?.simplify();
    let node = RecursionNode {
        pieces: pieces.to_vec(),
        removed: pieces[j].clone(),
        staying: Some(staying),
        pairs,
        inner,
        inner_tilde,
        child: Box::new(child),
    };
    Ok((tilde, Certificate::Recursion(Mode::Homeo, node)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::map::distance::{exact_distance, itinerary_respects};
    use crate::map::examples::*;
    use crate::map::machine::{ensure_valid, is_homeomorphism};
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
    fn identity_is_its_own_perturbation() {
        let (tilde, cert) = lemma41(&identity_global(2), &depth1(2)).unwrap();
        let d: BigRat = exact_distance(&identity_global(2), &tilde).unwrap();
        assert_eq!(d, BigRat::from_i64(0));
        match cert {
            Certificate::HomeoLemma { classes, .. } => {
                assert!(classes.iter().all(|c| matches!(c, PieceClass::Invariant { .. })));
            }
            _ => panic!("expected the basic certificate"),
        }
    }

    #[test]
    fn swap_is_reproduced_by_the_recursion() {
        let (tilde, cert) = periodize_homeo(&swap2(), &depth1(2)).unwrap();
        ensure_valid(&tilde).unwrap();
        assert!(is_homeomorphism(&tilde));
        assert!(itinerary_respects(&swap2(), &tilde, &depth1(2)).unwrap());
        // The construction returns the swap itself; every point has
        // period two.
        let d: BigRat = exact_distance(&swap2(), &tilde).unwrap();
        assert_eq!(d, BigRat::from_i64(0));
        assert!(matches!(cert, Certificate::Recursion(Mode::Homeo, _)));
        let x = pt("1|2");
        let y = tilde.evaluate(&x).unwrap();
        assert_eq!(tilde.evaluate(&y).unwrap(), x);
    }

    #[test]
    fn odometer_becomes_the_swap() {
        let t = odometer();
        let (tilde, _) = periodize_homeo(&t, &depth1(2)).unwrap();
        ensure_valid(&tilde).unwrap();
        assert!(is_homeomorphism(&tilde));
        assert!(itinerary_respects(&t, &tilde, &depth1(2)).unwrap());
        let d: BigRat = exact_distance(&t, &tilde).unwrap();
        assert_eq!(d, BigRat::from_ratio(1, 4));
        let d_swap: BigRat = exact_distance(&swap2(), &tilde).unwrap();
        assert_eq!(d_swap, BigRat::from_i64(0));
    }

    #[test]
    fn source_sink_construction_drains_and_absorbs() {
        // A homeomorphism with [1] a proper sink and [2] a proper source:
        // map [1] onto [11] and [2] onto [12] u [2].
        let a = ab(2);
        let h1 = canonical_homeo(
            &ClopenSet::cylinder(a, w("1")),
            &ClopenSet::cylinder(a, w("11")),
        )
        .unwrap();
        let h2 = canonical_homeo(
            &ClopenSet::cylinder(a, w("2")),
            &ClopenSet::new(a, [w("12"), w("2")]),
        )
        .unwrap();
        let t = CantorMap::glue(
            &[&h1, &h2],
            ClopenSet::whole(a),
            ClopenSet::whole(a),
        )
        .unwrap();
        ensure_valid(&t).unwrap();
        assert!(is_homeomorphism(&t));

        let (tilde, cert) = lemma41(&t, &depth1(2)).unwrap();
        ensure_valid(&tilde).unwrap();
        assert!(is_homeomorphism(&tilde));
        assert!(itinerary_respects(&t, &tilde, &depth1(2)).unwrap());
        match &cert {
            Certificate::HomeoLemma { classes, fixed_points, .. } => {
                assert!(classes.iter().any(|c| matches!(c, PieceClass::Sink { .. })));
                assert!(classes.iter().any(|c| matches!(c, PieceClass::Source { .. })));
                for p in fixed_points {
                    assert_eq!(tilde.evaluate(p).unwrap(), *p, "fixed point {p}");
                }
            }
            _ => panic!("expected the basic certificate"),
        }
        // Orbits drain from the source through the exit into the sink and
        // then climb: the piece itinerary is eventually constant at [1].
        let mut x = pt("221|2");
        for _ in 0..40 {
            x = tilde.evaluate(&x).unwrap();
        }
        assert!(x.starts_with(&w("1")));
    }

    #[test]
    fn three_symbol_rotation() {
        let t = cycle(3);
        let (tilde, _) = periodize_homeo(&t, &depth1(3)).unwrap();
        ensure_valid(&tilde).unwrap();
        assert!(is_homeomorphism(&tilde));
        assert!(itinerary_respects(&t, &tilde, &depth1(3)).unwrap());
        let d: BigRat = exact_distance(&t, &tilde).unwrap();
        assert!(d <= BigRat::half_pow(2));
        // Some orbit must be exactly periodic with period three.
        let mut x = pt("|1");
        let x0 = x.clone();
        for _ in 0..3 {
            x = tilde.evaluate(&x).unwrap();
        }
        assert_eq!(x, x0);
    }
}
