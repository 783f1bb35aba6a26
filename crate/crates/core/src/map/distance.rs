//! Exact sup-distance between two maps on a common domain, and the
//! itinerary comparison against a cylinder partition.
//!
//! The distance walk descends the symbol tree with both maps' cell
//! automata. At the first node where both sides have committed to a rule,
//! the supremum over that joint cell has a closed form (the tails of the
//! two images are coupled — they come from the same input). Ladder rides
//! repeat their pattern at equal-or-greater depth, so a state repeat
//! prunes; the distinguished points (assigned points and ladder limits)
//! are compared directly.

use crate::clopen::ClopenSet;
use crate::error::{Error, Result};
use crate::point::{metric_d, Point};
use crate::scalar::Scalar;
use crate::word::{lcp, Word};

use super::machine;
use super::rule::{CellShape, Rule, ShapeState};
use super::CantorMap;

/// The image of a whole cylinder cell under one rule: either `word . s`
/// over all tails `s`, or a constant point.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum ImgExpr {
    Stream(Word),
    Const(Point),
}

/// The image expression of the rule covering the cylinder `[w]`, if one
/// cell of the map contains `[w]` entirely.
pub fn img_expr_at(map: &CantorMap, w: &Word) -> Option<ImgExpr> {
    for r in map.rules() {
        match r {
            Rule::Transport { src, dst } => {
                if src.is_prefix_of(w) {
                    return Some(ImgExpr::Stream(dst.concat(&w.strip_prefix(src).unwrap())));
                }
            }
            Rule::Collapse { src, value } => {
                if src.is_prefix_of(w) {
                    return Some(ImgExpr::Const(value.clone()));
                }
            }
            Rule::Tower(t) => {
                // [w] lies inside the shell (m, h) when the shell word is
                // a prefix of w.
                if !t.src_base.is_prefix_of(w) {
                    continue;
                }
                let tail = w.strip_prefix(&t.src_base).unwrap();
                let mut m = 0usize;
                let mut rest = tail.clone();
                while t.src_ladder.is_prefix_of(&rest) {
                    rest = rest.strip_prefix(&t.src_ladder).unwrap();
                    m += 1;
                }
                if m < t.start {
                    continue;
                }
                if let Some(h) = t.branches.keys().find(|k| k.is_prefix_of(&rest)) {
                    let extra = rest.strip_prefix(h).unwrap();
                    return Some(ImgExpr::Stream(t.img_shell_word(m, h).concat(&extra)));
                }
            }
            Rule::PointRule { .. } => {}
        }
    }
    None
}

/// Supremum of `d(F(x), G(x))` over `x` in the joint cell `[w]`, where
/// the two images share the tail of `x`. Returns the value and a witness
/// attaining it.
fn joint_cell_sup<R: Scalar>(w: &Word, fe: &ImgExpr, ge: &ImgExpr, n: u8) -> (R, Point) {
    let any_tail = Point::new(Word::empty(), Word::new(vec![1])).unwrap();
    match (fe, ge) {
        (ImgExpr::Stream(a), ImgExpr::Stream(b)) => {
            if a == b {
                (R::zero(), any_tail.prepend(w))
            } else {
                let c = lcp(a, b);
                if c == a.len().min(b.len()) {
                    // One image word extends the other: the first free
                    // position disagrees for an adversarial tail.
                    let (short, long) = if a.len() < b.len() { (a, b) } else { (b, a) };
                    let avoid = long.sym(short.len());
                    let sym = (1..=n).find(|&s| s != avoid).unwrap();
                    let tail = any_tail.prepend(&Word::new(vec![sym]));
                    (R::half_pow(c + 1), tail.prepend(w))
                } else {
                    (R::half_pow(c + 1), any_tail.prepend(w))
                }
            }
        }
        (ImgExpr::Stream(a), ImgExpr::Const(q)) | (ImgExpr::Const(q), ImgExpr::Stream(a)) => {
            if q.starts_with(a) {
                let avoid = q.sym(a.len());
                let sym = (1..=n).find(|&s| s != avoid).unwrap();
                let tail = any_tail.prepend(&Word::new(vec![sym]));
                (R::half_pow(a.len() + 1), tail.prepend(w))
            } else {
                let c = (0..a.len()).find(|&i| a.sym(i) != q.sym(i)).unwrap();
                (R::half_pow(c + 1), any_tail.prepend(w))
            }
        }
        (ImgExpr::Const(q), ImgExpr::Const(p)) => (metric_d(q, p), any_tail.prepend(w)),
    }
}

/// The exact supremum of `d(F(x), G(x))` over the common domain, with a
/// point attaining it (or any domain point when the distance is zero).
pub fn exact_distance_witnessed<R: Scalar>(f: &CantorMap, g: &CantorMap) -> Result<(R, Point)> {
    if f.domain() != g.domain() {
        return Err(Error::DomainMismatch("sup distance needs a common domain".into()));
    }
    if f.domain().is_empty() {
        return Err(Error::EmptyClopen);
    }
    let n = f.alphabet().size();

    // Caps large enough that state repeats happen only past both maps'
    // structure and one full ladder realignment, where per-cell distances
    // repeat at equal or smaller values.
    let d0 = f.depth_hint().max(g.depth_hint());
    let mut l = 1usize;
    for m in [f, g] {
        for r in m.rules() {
            if let Rule::Tower(t) = r {
                l = num_integer::lcm(l, t.src_ladder.len());
                l = num_integer::lcm(l, t.dst_ladder.len());
            }
        }
    }
    let extra = d0 + 2 * l + 4;

    let shapes: Vec<CellShape> = f
        .rules()
        .iter()
        .chain(g.rules())
        .map(|r| r.src_shape())
        .collect();
    let caps: Vec<usize> = shapes
        .iter()
        .map(|s| match s {
            CellShape::Fam { start, .. } => (*start).max(1) + extra,
            _ => 1,
        })
        .collect();
    let nf = f.rules().len();

    struct Ctx<'a> {
        f: &'a CantorMap,
        g: &'a CantorMap,
        shapes: &'a [CellShape],
        caps: &'a [usize],
        nf: usize,
        n: u8,
    }
    let ctx = Ctx { f, g, shapes: &shapes, caps: &caps, nf, n };

    fn walk<R: Scalar>(
        ctx: &Ctx,
        w: &Word,
        states: &[ShapeState],
        best: &mut (R, Option<Point>),
        path: &mut Vec<Vec<ShapeState>>,
    ) -> Result<()> {
        if !ctx.f.domain().intersects_cylinder(w) {
            return Ok(());
        }
        let f_accept = states[..ctx.nf].iter().any(|s| *s == ShapeState::Accept);
        let g_accept = states[ctx.nf..].iter().any(|s| *s == ShapeState::Accept);
        if f_accept && g_accept {
            let fe = img_expr_at(ctx.f, w)
                .ok_or_else(|| Error::InvalidMap("accepted cell has no covering".into()))?;
            let ge = img_expr_at(ctx.g, w)
                .ok_or_else(|| Error::InvalidMap("accepted cell has no covering".into()))?;
            let (d, witness) = joint_cell_sup::<R>(w, &fe, &ge, ctx.n);
            if d > best.0 || best.1.is_none() {
                *best = (d, Some(witness));
            }
            return Ok(());
        }
        let f_alive = f_accept
            || states[..ctx.nf]
                .iter()
                .any(|s| !matches!(s, ShapeState::Dead | ShapeState::Pt { .. }));
        let g_alive = g_accept
            || states[ctx.nf..]
                .iter()
                .any(|s| !matches!(s, ShapeState::Dead | ShapeState::Pt { .. }));
        if !f_alive || !g_alive {
            if ctx.f.domain().contains_cylinder(w) {
                return Err(Error::InvalidMap(format!("domain not covered below [{w}]")));
            }
            return Ok(());
        }
        if path.iter().any(|s| s == states) {
            // Ladder ride: deeper cells repeat the window's patterns at
            // equal or greater image agreement; limits are covered by the
            // distinguished points.
            return Ok(());
        }
        path.push(states.to_vec());
        for a in 1..=ctx.n {
            let next: Vec<ShapeState> = states
                .iter()
                .zip(ctx.shapes)
                .zip(ctx.caps)
                .map(|((st, sh), &cap)| sh.step(st, a, cap))
                .collect();
            walk(ctx, &w.append_sym(a), &next, best, path)?;
        }
        path.pop();
        Ok(())
    }

    let mut best: (R, Option<Point>) = (R::zero(), None);
    let starts: Vec<ShapeState> = shapes.iter().map(|s| s.start_state()).collect();
    let mut path = Vec::new();
    walk(&ctx, &Word::empty(), &starts, &mut best, &mut path)?;

    // Distinguished points: assigned points and ladder limits inside the
    // domain, where the walk pruned.
    let mut specials: Vec<Point> = Vec::new();
    for m in [f, g] {
        for r in m.rules() {
            match r {
                Rule::PointRule { src, .. } => specials.push(src.clone()),
                Rule::Tower(t) => specials.push(t.src_limit()),
                _ => {}
            }
        }
    }
    specials.sort();
    specials.dedup();
    for p in specials {
        if f.domain().contains_point(&p) {
            let d: R = metric_d(&f.evaluate(&p)?, &g.evaluate(&p)?);
            if d > best.0 || best.1.is_none() {
                best = (d, Some(p));
            }
        }
    }
    let witness = best
        .1
        .unwrap_or_else(|| Point::new(f.domain().cylinders()[0].clone(), Word::new(vec![1])).unwrap());
    Ok((best.0, witness))
}

/// The exact supremum of `d(F(x), G(x))` over the common domain.
pub fn exact_distance<R: Scalar>(f: &CantorMap, g: &CantorMap) -> Result<R> {
    exact_distance_witnessed(f, g).map(|(d, _)| d)
}

/// Whether the two maps land in the same piece everywhere: for every
/// piece, the preimages under both maps coincide exactly.
pub fn itinerary_respects(f: &CantorMap, g: &CantorMap, pieces: &[Word]) -> Result<bool> {
    if f.domain() != g.domain() {
        return Err(Error::DomainMismatch("itinerary needs a common domain".into()));
    }
    for p in pieces {
        let cell = ClopenSet::cylinder(f.alphabet(), p.clone());
        let pf = machine::preimage(f, &cell)?;
        let pg = machine::preimage(g, &cell)?;
        if pf != pg {
            return Ok(false);
        }
    }
    Ok(true)
}
