//! Composition of rule systems.
//!
//! `compose(f, g)` builds a rule system for `x -> f(g(x))`. Finite rules
//! compose by splitting against `f`'s cells. A tower of `g` needs care:
//! its image shells converge to a limit `q`, and the composed form
//! depends on how `f` covers a neighborhood of `q`:
//!
//! * `q` inside an `f`-transport cell (or a tower shell of `f`): the deep
//!   shells rebase onto that cell and stay one tower;
//! * `q` inside an `f`-collapse cell: a whole neighborhood of the tower's
//!   own limit maps into that cell under `g`, so the composition is
//!   constant there — one collapse on an enclosing cylinder replaces
//!   every rule inside it;
//! * `q` assigned by an `f`-point rule: the shells thread through `f`'s
//!   ladder structure around `q`; the composed rules per shell become
//!   periodic in the shell index and are rolled back up into towers.

use crate::clopen::ClopenSet;
use crate::error::{Error, Result};
use crate::point::Point;
use crate::word::Word;

use super::machine;
use super::rule::{Rule, TowerRule};
use super::CantorMap;

/// How `f` covers a specific point.
enum Covering {
    /// A transport-like cell `[src] -> dst . tails` (plain transports and
    /// tower shells both take this form).
    Cell { src: Word, dst: Word },
    Collapse { src: Word, value: Point },
    Assigned,
}

fn f_covering(f: &CantorMap, q: &Point) -> Result<Covering> {
    for r in f.rules() {
        match r {
            Rule::Transport { src, dst } => {
                if q.starts_with(src) {
                    return Ok(Covering::Cell { src: src.clone(), dst: dst.clone() });
                }
            }
            Rule::Collapse { src, value } => {
                if q.starts_with(src) {
                    return Ok(Covering::Collapse { src: src.clone(), value: value.clone() });
                }
            }
            Rule::Tower(t) => {
                if let Some((m, h, _)) = t.match_point(q) {
                    return Ok(Covering::Cell {
                        src: t.src_shell_word(m, &h),
                        dst: t.img_shell_word(m, &h),
                    });
                }
            }
            Rule::PointRule { src, .. } => {
                if q == src {
                    return Ok(Covering::Assigned);
                }
            }
        }
    }
    Err(Error::NoRuleMatch(q.to_string()))
}

/// Composed rules for the family `x = u.s -> f(v.s)`.
fn compose_transport(f: &CantorMap, u: &Word, v: &Word) -> Result<Vec<Rule>> {
    let mut out = Vec::new();
    for r in f.rules() {
        match r {
            Rule::Transport { src, dst } => {
                if src.is_prefix_of(v) {
                    out.push(Rule::Transport {
                        src: u.clone(),
                        dst: dst.concat(&v.strip_prefix(src).unwrap()),
                    });
                } else if v.is_prefix_of(src) && *v != *src {
                    out.push(Rule::Transport {
                        src: u.concat(&src.strip_prefix(v).unwrap()),
                        dst: dst.clone(),
                    });
                }
            }
            Rule::Collapse { src, value } => {
                if src.is_prefix_of(v) {
                    out.push(Rule::Collapse { src: u.clone(), value: value.clone() });
                } else if v.is_prefix_of(src) && *v != *src {
                    out.push(Rule::Collapse {
                        src: u.concat(&src.strip_prefix(v).unwrap()),
                        value: value.clone(),
                    });
                }
            }
            Rule::PointRule { src, dst } => {
                if src.starts_with(v) {
                    out.push(Rule::PointRule {
                        src: src.drop_prefix(v.len()).prepend(u),
                        dst: dst.clone(),
                    });
                }
            }
            Rule::Tower(t) => {
                out.extend(transport_into_tower(u, v, t));
            }
        }
    }
    Ok(out)
}

/// The pieces of `x = u.s -> f(v.s)` covered by one tower of `f`.
fn transport_into_tower(u: &Word, v: &Word, t: &TowerRule) -> Vec<Rule> {
    let mut out = Vec::new();
    let g = &t.src_ladder;
    // Shells whose ladder track has not yet passed `v`: containments in
    // both directions occur and are handled per shell.
    let mut m = t.start;
    while t.src_base.len() + m * g.len() <= v.len() {
        for h in t.branches.keys() {
            let shell = t.src_shell_word(m, h);
            if shell.is_prefix_of(v) {
                out.push(Rule::Transport {
                    src: u.clone(),
                    dst: t.img_shell_word(m, h).concat(&v.strip_prefix(&shell).unwrap()),
                });
            } else if v.is_prefix_of(&shell) {
                out.push(Rule::Transport {
                    src: u.concat(&shell.strip_prefix(v).unwrap()),
                    dst: t.img_shell_word(m, h),
                });
            }
        }
        m += 1;
    }
    // All deeper shells lie inside [v] exactly when v sits on the ladder
    // track; they assemble into one composed tower.
    if t.src_limit().starts_with(v) {
        let track = t.src_base.concat(&g.repeat(m));
        out.push(Rule::Tower(TowerRule {
            src_base: u.concat(&track.strip_prefix(v).unwrap()),
            src_ladder: g.clone(),
            branches: t.branches.clone(),
            start: 0,
            offset: m as i64 + t.offset,
            dst_base: t.dst_base.clone(),
            dst_ladder: t.dst_ladder.clone(),
        }));
    }
    out
}

/// Pushes a tower rule after normalizing its branch values (leading
/// destination-ladder blocks move into the offset, splitting by shift).
fn push_tower(out: &mut Vec<Rule>, t: TowerRule) {
    for nt in t.normalized() {
        out.push(Rule::Tower(nt));
    }
}

/// Composed rules for a `g`-tower whose image limit is *not* inside an
/// `f`-collapse cell (those were replaced by enclosure collapses before).
fn compose_tower(f: &CantorMap, t: &TowerRule) -> Result<Vec<Rule>> {
    let q = t.img_limit();
    match f_covering(f, &q)? {
        Covering::Collapse { .. } => Err(Error::Construction(
            "tower tail into a collapse cell should have been enclosed".into(),
        )),
        Covering::Cell { src: c, dst: d } => {
            // Deep image shells rebase onto the covering cell: find the
            // first shell whose image track reaches past `c`.
            let mut out = Vec::new();
            let mut mc = t.start;
            while t.dst_base.len() + ((mc as i64 + t.offset) as usize) * t.dst_ladder.len()
                < c.len()
            {
                for h in t.branches.keys() {
                    out.extend(compose_transport(
                        f,
                        &t.src_shell_word(mc, h),
                        &t.img_shell_word(mc, h),
                    )?);
                }
                mc += 1;
            }
            let img_track = t
                .dst_base
                .concat(&t.dst_ladder.repeat((mc as i64 + t.offset) as usize));
            let rebased = img_track
                .strip_prefix(&c)
                .expect("covering cell is a prefix of the deep image track");
            push_tower(
                &mut out,
                TowerRule {
                    src_base: t.src_base.clone(),
                    src_ladder: t.src_ladder.clone(),
                    branches: t.branches.clone(),
                    start: mc,
                    offset: -(mc as i64),
                    dst_base: d.concat(&rebased),
                    dst_ladder: t.dst_ladder.clone(),
                },
            );
            Ok(out)
        }
        Covering::Assigned => compose_tower_threaded(f, t),
    }
}

/// The image limit of the `g`-tower is an assigned point of `f` (a ladder
/// limit of `f`'s own structure). Compose shell by shell until past all
/// of `f`'s finite structure, then verify the per-shell rules repeat with
/// a fixed period and roll them back into towers.
fn compose_tower_threaded(f: &CantorMap, t: &TowerRule) -> Result<Vec<Rule>> {
    let mut out = Vec::new();
    let df = f.depth_hint() + 1;
    let gg_img = t.dst_ladder.len();
    let mut m0 = t.start;
    while t.dst_base.len() + ((m0 as i64 + t.offset) as usize) * gg_img <= df {
        m0 += 1;
    }
    // Image tracks advance `gg_img` symbols per level; one period realigns
    // every ladder of `f`.
    let mut l = gg_img;
    for r in f.rules() {
        if let Rule::Tower(ft) = r {
            l = num_integer::lcm(l, ft.src_ladder.len());
            l = num_integer::lcm(l, ft.dst_ladder.len());
        }
    }
    let period = l / gg_img;

    for m in t.start..m0 {
        for h in t.branches.keys() {
            out.extend(compose_transport(f, &t.src_shell_word(m, h), &t.img_shell_word(m, h))?);
        }
    }

    // Per-shell composed pieces: (source extension past the shell word,
    // image word), sorted for stable comparison across the window.
    let pieces_at = |m: usize, h: &Word| -> Result<Vec<(Word, Word)>> {
        let shell = t.src_shell_word(m, h);
        let rules = compose_transport(f, &shell, &t.img_shell_word(m, h))?;
        let mut pieces = Vec::new();
        for r in rules {
            match r {
                Rule::Transport { src, dst } => {
                    pieces.push((src.strip_prefix(&shell).unwrap(), dst))
                }
                _ => {
                    return Err(Error::Construction(
                        "tower threading hit non-transport structure past the stable depth"
                            .into(),
                    ))
                }
            }
        }
        pieces.sort();
        Ok(pieces)
    };

    for r in 0..period {
        for h in t.branches.keys() {
            let a_list = pieces_at(m0 + r, h)?;
            let b_list = pieces_at(m0 + r + period, h)?;
            let c_list = pieces_at(m0 + r + 2 * period, h)?;
            if a_list.len() != b_list.len() || b_list.len() != c_list.len() {
                return Err(Error::Construction(
                    "tower threading did not stabilize (piece counts differ)".into(),
                ));
            }
            for ((ae, ad), ((be, bd), (ce, cd))) in
                a_list.iter().zip(b_list.iter().zip(c_list.iter()))
            {
                if ae != be || be != ce {
                    return Err(Error::Construction(
                        "tower threading did not stabilize (extensions differ)".into(),
                    ));
                }
                let gamma = bd
                    .len()
                    .checked_sub(ad.len())
                    .filter(|&g| g > 0 && cd.len() == bd.len() + g)
                    .ok_or_else(|| {
                        Error::Construction("tower threading pump length inconsistent".into())
                    })?;
                let lcp_ab = crate::word::lcp(ad, bd);
                let mut fitted = None;
                for pos in 0..=lcp_ab.min(ad.len()) {
                    let y = bd.slice(pos..pos + gamma);
                    let fits_b = bd.slice(pos + gamma..bd.len()) == ad.slice(pos..ad.len());
                    let cd_expect =
                        bd.slice(0..pos).concat(&y).concat(&bd.slice(pos..bd.len()));
                    if fits_b && *cd == cd_expect {
                        fitted = Some((ad.slice(0..pos), y, ad.slice(pos..ad.len())));
                        break;
                    }
                }
                let Some((x, y, z)) = fitted else {
                    return Err(Error::Construction(
                        "tower threading pump did not fit".into(),
                    ));
                };
                // Cells  [src_base . gg^(m0+r) . (gg^period)^k . h . e]
                // map to [x . y^k . z . tails],  k >= 0.
                push_tower(
                    &mut out,
                    TowerRule {
                        src_base: t.src_base.concat(&t.src_ladder.repeat(m0 + r)),
                        src_ladder: t.src_ladder.repeat(period),
                        branches: [(h.concat(ae), z)].into_iter().collect(),
                        start: 0,
                        offset: 0,
                        dst_base: x,
                        dst_ladder: y,
                    },
                );
            }
        }
    }
    Ok(out)
}

/// The composition `f` after `g`: a rule system for `x -> f(g(x))`.
/// Requires `g`'s codomain to lie inside `f`'s domain and both maps to be
/// valid.
pub fn compose(f: &CantorMap, g: &CantorMap) -> Result<CantorMap> {
    if g.alphabet() != f.alphabet() {
        return Err(Error::AlphabetMismatch);
    }
    if !g.codomain().is_subset_of(f.domain()) {
        return Err(Error::DomainMismatch(
            "inner codomain escapes outer domain".into(),
        ));
    }
    let alphabet = g.alphabet();

    // Enclosure collapses around g-towers whose image limit lands in an
    // f-collapse cell.
    let mut enclosures: Vec<(Word, Point)> = Vec::new();
    for r in g.rules() {
        let Rule::Tower(t) = r else { continue };
        let q = t.img_limit();
        if let Covering::Collapse { src: c, value } = f_covering(f, &q)? {
            let cell = ClopenSet::cylinder(alphabet, c);
            let pre = machine::preimage(g, &cell)?;
            let mut level = t.start;
            let enclosure = loop {
                let word = t.src_base.concat(&t.src_ladder.repeat(level));
                let inside = ClopenSet::cylinder(alphabet, word.clone()).intersection(g.domain());
                if inside.is_subset_of(&pre) {
                    break word;
                }
                level += 1;
                if level > t.start + pre.max_depth() + 64 {
                    return Err(Error::Construction(
                        "no enclosing cylinder maps into the collapse cell".into(),
                    ));
                }
            };
            enclosures.push((enclosure, value));
        }
    }
    // Keep outermost enclosures only (nested ones agree by construction).
    enclosures.sort();
    let mut kept: Vec<(Word, Point)> = Vec::new();
    for (w, v) in enclosures {
        if !kept.iter().any(|(k, _)| k.is_prefix_of(&w)) {
            kept.push((w, v));
        }
    }

    let enclosed = ClopenSet::new(alphabet, kept.iter().map(|(w, _)| w.clone()));
    let outside = g.domain().difference(&enclosed);
    let g_out = if kept.is_empty() { g.clone() } else { g.restrict(&outside)? };

    let mut rules: Vec<Rule> = Vec::new();
    for (w, value) in &kept {
        for cyl in ClopenSet::cylinder(alphabet, w.clone())
            .intersection(g.domain())
            .cylinders()
        {
            rules.push(Rule::Collapse { src: cyl.clone(), value: value.clone() });
        }
    }
    for r in g_out.rules() {
        match r {
            Rule::PointRule { src, dst } => {
                rules.push(Rule::PointRule { src: src.clone(), dst: f.evaluate(dst)? });
            }
            Rule::Collapse { src, value } => {
                rules.push(Rule::Collapse { src: src.clone(), value: f.evaluate(value)? });
            }
            Rule::Transport { src, dst } => {
                rules.extend(compose_transport(f, src, dst)?);
            }
            Rule::Tower(t) => {
                rules.extend(compose_tower(f, t)?);
            }
        }
    }
    CantorMap::new(alphabet, g.domain().clone(), f.codomain().clone(), rules)
}

#[cfg(test)]
mod tests {
    use super::super::examples::*;
    use super::super::machine::{ensure_valid, validate};
    use super::*;
    use crate::word::Alphabet;

    fn w(s: &str) -> Word {
        Word::parse_digits(s).unwrap()
    }

    fn pt(s: &str) -> Point {
        Point::parse(s).unwrap()
    }

    fn sample_points() -> Vec<Point> {
        ["|1", "|2", "1|2", "2|1", "12|21", "221|1", "21|2", "112|12", "|12", "|21", "2211|121"]
            .iter()
            .map(|s| pt(s))
            .collect()
    }

    fn check_composition(f: &CantorMap, g: &CantorMap) {
        let fg = compose(f, g).unwrap();
        ensure_valid(&fg)
            .unwrap_or_else(|e| panic!("composition invalid: {e}\n f={f:?}\n g={g:?}\n fg={fg:?}"));
        for x in sample_points() {
            let expect = f.evaluate(&g.evaluate(&x).unwrap()).unwrap();
            let got = fg.evaluate(&x).unwrap();
            assert_eq!(got, expect, "at {x}");
        }
    }

    #[test]
    fn compose_shift_with_shift() {
        let fg = compose(&shift2(), &shift2()).unwrap();
        for x in sample_points() {
            assert_eq!(fg.evaluate(&x).unwrap(), x.drop_prefix(2));
        }
        assert!(validate(&fg).is_valid());
    }

    #[test]
    fn compose_swap_involution() {
        let fg = compose(&swap2(), &swap2()).unwrap();
        for x in sample_points() {
            assert_eq!(fg.evaluate(&x).unwrap(), x);
        }
    }

    #[test]
    fn compose_swap_after_odometer() {
        let fg = compose(&swap2(), &odometer()).unwrap();
        ensure_valid(&fg).unwrap();
        // On [21]: the odometer sends 21 s -> 12 s, the swap then to 22 s.
        assert_eq!(fg.evaluate(&pt("21|2")).unwrap(), pt("22|2"));
        check_composition(&swap2(), &odometer());
    }

    #[test]
    fn compose_pairs_agree_with_pointwise() {
        let maps = [shift2(), swap2(), odometer(), identity_global(2)];
        for f in &maps {
            for g in &maps {
                check_composition(f, g);
            }
        }
    }

    #[test]
    fn compose_odometer_twice() {
        // Tower-into-tower threading: +2 on the adding machine.
        check_composition(&odometer(), &odometer());
        let fg = compose(&odometer(), &odometer()).unwrap();
        assert_eq!(fg.evaluate(&pt("11|2")).unwrap(), pt("1|2"));
        assert_eq!(fg.evaluate(&pt("|2")).unwrap(), pt("2|1"));
    }

    #[test]
    fn compose_collapse_after_tower_encloses() {
        // f collapses [1]; the odometer's tower images converge into [1],
        // so the composition is constant on a neighborhood of 2^inf.
        let f = CantorMap::global(
            ab(2),
            vec![
                Rule::Collapse { src: w("1"), value: pt("|1") },
                Rule::transport(w("2"), w("2")),
            ],
        )
        .unwrap();
        let g = odometer();
        let fg = compose(&f, &g).unwrap();
        ensure_valid(&fg).unwrap();
        for x in sample_points() {
            let expect = f.evaluate(&g.evaluate(&x).unwrap()).unwrap();
            assert_eq!(fg.evaluate(&x).unwrap(), expect, "at {x}");
        }
        // The whole cylinder [2] composes to the constant 1^inf.
        assert!(fg
            .rules()
            .iter()
            .any(|r| matches!(r, Rule::Collapse { src, value } if *src == w("2") && *value == pt("|1"))));
    }

    #[test]
    fn compose_respects_domains() {
        let a = Alphabet::new(2).unwrap();
        let left = ClopenSet::cylinder(a, w("1"));
        let g = shift2().restrict(&left).unwrap();
        let fg = compose(&swap2(), &g).unwrap();
        assert_eq!(fg.domain(), &left);
        // shift(12|2) = 2|2, then the swap rewrites the head: 1|2.
        assert_eq!(fg.evaluate(&pt("12|2")).unwrap(), pt("1|2"));
        assert!(fg.evaluate(&pt("2|2")).is_err());
    }

    #[test]
    fn inverse_composes_to_identity() {
        for m in [swap2(), odometer(), cycle(3)] {
            let inv = m.invert().unwrap();
            let fg = compose(&inv, &m).unwrap();
            ensure_valid(&fg).unwrap();
            for x in sample_points() {
                assert_eq!(fg.evaluate(&x).unwrap(), x);
            }
        }
    }
}
