//! The finite cell quotient of a map against a cylinder partition:
//! refined cells with exact piece labels, the raw material for witness
//! search, itinerary checks and cycle analysis.

use crate::clopen::ClopenSet;
use crate::error::{Error, Result};
use crate::point::Point;
use crate::word::Word;

use super::distance::ImgExpr;
use super::rule::{Rule, TowerRule};
use super::CantorMap;

/// One node of the cell quotient.
#[derive(Clone, Debug)]
pub enum CellNode {
    /// A cylinder cell `[word]` with its image expression.
    Fin { word: Word, img: ImgExpr, label: usize },
    /// A tower tail: all shells from the tower's start index up; the
    /// label is constant across the tail by construction.
    Fam { tower: TowerRule, label: usize },
    /// A single assigned point.
    Pt { src: Point, dst: Point, label: usize },
}

impl CellNode {
    pub fn label(&self) -> usize {
        match self {
            CellNode::Fin { label, .. } | CellNode::Fam { label, .. } | CellNode::Pt { label, .. } => {
                *label
            }
        }
    }
}

/// The cell quotient of `map` against `pieces`.
#[derive(Clone, Debug)]
pub struct CellDynamics {
    pub pieces: Vec<Word>,
    pub nodes: Vec<CellNode>,
}

/// Index of the piece whose cylinder contains the given word's cylinder.
fn piece_of_word(pieces: &[Word], w: &Word) -> Result<usize> {
    pieces
        .iter()
        .position(|p| p.is_prefix_of(w))
        .ok_or_else(|| Error::Construction(format!("no piece contains [{w}]")))
}

fn piece_of_point(pieces: &[Word], x: &Point) -> Result<usize> {
    pieces
        .iter()
        .position(|p| x.starts_with(p))
        .ok_or_else(|| Error::Construction(format!("no piece contains {x}")))
}

/// Refines the map until every cell's image word pins down its piece and
/// labels every cell. The pieces must be disjoint cylinders whose union
/// is the map's domain.
pub fn cell_dynamics(map: &CantorMap, pieces: &[Word]) -> Result<CellDynamics> {
    let alphabet = map.alphabet();
    let union = ClopenSet::new(alphabet, pieces.iter().cloned());
    if &union != map.domain() {
        return Err(Error::BadPartition);
    }
    for (i, p) in pieces.iter().enumerate() {
        for q in &pieces[i + 1..] {
            if p.comparable(q) {
                return Err(Error::BadPartition);
            }
        }
    }
    let k = pieces.iter().map(Word::len).max().unwrap_or(0);
    // Refine so image tracks pass the piece depth; tower tail labels are
    // then constant in the shell index. The ladder margin matters only
    // when towers are present.
    let has_towers = map.rules().iter().any(|r| matches!(r, Rule::Tower(_)));
    let margin = if has_towers { map.ladder_period() } else { 0 };
    let refined = map.refine_to_depth(k + margin);
    let mut nodes = Vec::new();
    for r in refined.rules() {
        match r {
            Rule::Transport { src, dst } => nodes.push(CellNode::Fin {
                word: src.clone(),
                img: ImgExpr::Stream(dst.clone()),
                label: piece_of_word(pieces, dst)?,
            }),
            Rule::Collapse { src, value } => nodes.push(CellNode::Fin {
                word: src.clone(),
                img: ImgExpr::Const(value.clone()),
                label: piece_of_point(pieces, value)?,
            }),
            Rule::Tower(t) => {
                let h = t.branches.keys().next().unwrap();
                let probe = t.img_shell_word(t.start, h);
                let label = piece_of_word(pieces, &probe)?;
                // All branches and all deeper shells share the label: the
                // image track is already past the piece depth.
                for h2 in t.branches.keys() {
                    debug_assert_eq!(
                        piece_of_word(pieces, &t.img_shell_word(t.start, h2))?,
                        label
                    );
                }
                nodes.push(CellNode::Fam { tower: t.clone(), label });
            }
            Rule::PointRule { src, dst } => nodes.push(CellNode::Pt {
                src: src.clone(),
                dst: dst.clone(),
                label: piece_of_point(pieces, dst)?,
            }),
        }
    }
    Ok(CellDynamics { pieces: pieces.to_vec(), nodes })
}

impl CellDynamics {
    /// Candidate witness cell words inside a piece carrying a given
    /// label: finite cell words plus the first shell word of each tower
    /// tail, in deterministic order.
    pub fn witness_words(&self, piece: usize, label: usize) -> Vec<Word> {
        let pw = &self.pieces[piece];
        let mut out = Vec::new();
        for n in &self.nodes {
            match n {
                CellNode::Fin { word, label: l, .. } => {
                    if *l == label && pw.is_prefix_of(word) {
                        out.push(word.clone());
                    }
                }
                CellNode::Fam { tower, label: l } => {
                    if *l == label {
                        for h in tower.branches.keys() {
                            let w = tower.src_shell_word(tower.start, h);
                            if pw.is_prefix_of(&w) {
                                out.push(w);
                            }
                        }
                    }
                }
                CellNode::Pt { .. } => {}
            }
        }
        out.sort();
        out
    }

    /// Whether some cell inside the piece keeps the piece's own label.
    pub fn piece_self_returns(&self, piece: usize) -> bool {
        !self.witness_words(piece, piece).is_empty()
            || self.nodes.iter().any(|n| match n {
                CellNode::Pt { src, label, .. } => {
                    *label == piece && src.starts_with(&self.pieces[piece])
                }
                _ => false,
            })
    }
}

#[cfg(test)]
mod tests {
    use super::super::examples::*;
    use super::*;

    fn w(s: &str) -> Word {
        Word::parse_digits(s).unwrap()
    }

    #[test]
    fn shift_cells_at_depth_one() {
        let cd = cell_dynamics(&shift2(), &[w("1"), w("2")]).unwrap();
        // Cells 11 -> piece 0, 12 -> piece 1, 21 -> piece 0, 22 -> piece 1.
        let mut labels: Vec<(Word, usize)> = cd
            .nodes
            .iter()
            .filter_map(|n| match n {
                CellNode::Fin { word, label, .. } => Some((word.clone(), *label)),
                _ => None,
            })
            .collect();
        labels.sort();
        assert_eq!(
            labels,
            vec![(w("11"), 0), (w("12"), 1), (w("21"), 0), (w("22"), 1)]
        );
    }

    #[test]
    fn swap_cells_at_depth_one() {
        let cd = cell_dynamics(&swap2(), &[w("1"), w("2")]).unwrap();
        for n in &cd.nodes {
            if let CellNode::Fin { word, label, .. } = n {
                let first = word.sym(0);
                assert_eq!(*label, if first == 1 { 1 } else { 0 });
            }
        }
        assert!(cd.piece_self_returns(0) == false && cd.piece_self_returns(1) == false);
    }

    #[test]
    fn odometer_cells_at_depth_one() {
        let cd = cell_dynamics(&odometer(), &[w("1"), w("2")]).unwrap();
        // [1] -> piece 1; every tower shell and the limit -> piece 0.
        for n in &cd.nodes {
            match n {
                CellNode::Fin { word, label, .. } => {
                    if word.sym(0) == 1 {
                        assert_eq!(*label, 1);
                    } else {
                        assert_eq!(*label, 0);
                    }
                }
                CellNode::Fam { label, .. } => assert_eq!(*label, 0),
                CellNode::Pt { label, .. } => assert_eq!(*label, 0),
            }
        }
    }

    #[test]
    fn shift_self_returns_and_witnesses() {
        let cd = cell_dynamics(&shift2(), &[w("1"), w("2")]).unwrap();
        assert!(cd.piece_self_returns(0));
        assert!(cd.piece_self_returns(1));
        assert_eq!(cd.witness_words(0, 0), vec![w("11")]);
        assert_eq!(cd.witness_words(1, 1), vec![w("22")]);
    }

    #[test]
    fn partition_validation() {
        assert!(cell_dynamics(&shift2(), &[w("1")]).is_err());
        assert!(cell_dynamics(&shift2(), &[w("1"), w("12"), w("2")]).is_err());
    }
}
