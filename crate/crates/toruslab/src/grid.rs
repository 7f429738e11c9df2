//! Exact permutation algebra on the `n x n` torus.
//!
//! Positions are 0-indexed cells `p = y * n + x`, with `x` growing eastward
//! and `y` northward. Tiles are named by the position they occupy in the
//! identity arrangement, so "tile t" is the tile that started at cell `t`.
//! The 1-based shell labels appear only through [`Labeling`].
//!
//! Direction convention, used everywhere: `Row` with direction `+1` shifts
//! the tiles of that row one cell eastward; `Col` with direction `+1` shifts
//! them one cell northward. `-1` is the opposite.

use crate::{Error, Result};

/// A cell of the torus grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Coord {
    pub x: usize,
    pub y: usize,
}

impl Coord {
    pub fn new(x: usize, y: usize) -> Self {
        Coord { x, y }
    }

    /// Flat cell index `y * n + x`.
    pub fn index(self, n: usize) -> usize {
        self.y * n + self.x
    }

    pub fn from_index(p: usize, n: usize) -> Self {
        Coord { x: p % n, y: p / n }
    }

    pub fn in_range(self, n: usize) -> bool {
        self.x < n && self.y < n
    }
}

/// Which kind of line a rotation acts on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Axis {
    Row,
    Col,
}

/// One generator of the lazy torus shuffle.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Move {
    Hold,
    Rotate { axis: Axis, index: usize, dir: i8 },
}

impl Move {
    pub fn rotate(axis: Axis, index: usize, dir: i8) -> Self {
        debug_assert!(dir == 1 || dir == -1);
        Move::Rotate { axis, index, dir }
    }

    /// The inverse generator (Hold is self-inverse).
    pub fn inverse(self) -> Self {
        match self {
            Move::Hold => Move::Hold,
            Move::Rotate { axis, index, dir } => Move::Rotate {
                axis,
                index,
                dir: -dir,
            },
        }
    }

    pub fn is_rotation(self) -> bool {
        matches!(self, Move::Rotate { .. })
    }

    /// Displacement applied to a tile sitting in the rotated line.
    pub fn delta(self) -> (i64, i64) {
        match self {
            Move::Hold => (0, 0),
            Move::Rotate {
                axis: Axis::Row,
                dir,
                ..
            } => (dir as i64, 0),
            Move::Rotate {
                axis: Axis::Col,
                dir,
                ..
            } => (0, dir as i64),
        }
    }

    /// Whether this move drags the tile currently at `c`.
    pub fn touches(self, c: Coord) -> bool {
        match self {
            Move::Hold => false,
            Move::Rotate {
                axis: Axis::Row,
                index,
                ..
            } => c.y == index,
            Move::Rotate {
                axis: Axis::Col,
                index,
                ..
            } => c.x == index,
        }
    }
}

/// A permutation of the `n^2` tiles, kept in both directions.
///
/// `tile_at[p]` is the tile occupying cell `p`; `pos_of[t]` is the cell
/// occupied by tile `t`. The two views are mutually inverse bijections.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct GridPerm {
    n: usize,
    tile_at: Vec<u32>,
    pos_of: Vec<u32>,
}

impl GridPerm {
    pub fn identity(n: usize) -> Self {
        let cells = n * n;
        let id: Vec<u32> = (0..cells as u32).collect();
        GridPerm {
            n,
            tile_at: id.clone(),
            pos_of: id,
        }
    }

    /// Builds a permutation from the position-to-tile view.
    pub fn from_tile_at(n: usize, tile_at: Vec<u32>) -> Result<Self> {
        let cells = n * n;
        if tile_at.len() != cells {
            return Err(Error::SizeMismatch {
                left: tile_at.len(),
                right: cells,
            });
        }
        let mut pos_of = vec![u32::MAX; cells];
        for (p, &t) in tile_at.iter().enumerate() {
            let t = t as usize;
            if t >= cells || pos_of[t] != u32::MAX {
                return Err(Error::InvalidParameter(format!(
                    "tile_at is not a permutation (entry {t} at cell {p})"
                )));
            }
            pos_of[t] = p as u32;
        }
        Ok(GridPerm { n, tile_at, pos_of })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn cells(&self) -> usize {
        self.n * self.n
    }

    pub fn tile_at(&self, p: usize) -> usize {
        self.tile_at[p] as usize
    }

    pub fn pos_of(&self, t: usize) -> usize {
        self.pos_of[t] as usize
    }

    pub fn tile_at_view(&self) -> &[u32] {
        &self.tile_at
    }

    pub fn coord_of(&self, t: usize) -> Coord {
        Coord::from_index(self.pos_of(t), self.n)
    }

    pub fn is_identity(&self) -> bool {
        self.tile_at.iter().enumerate().all(|(p, &t)| p as u32 == t)
    }

    /// Full-scan check that the two views are mutually inverse permutations.
    pub fn check_consistent(&self) -> bool {
        self.tile_at.len() == self.cells()
            && self.pos_of.len() == self.cells()
            && self
                .tile_at
                .iter()
                .enumerate()
                .all(|(p, &t)| self.pos_of[t as usize] == p as u32)
    }

    /// Applies one shuffle generator in place.
    pub fn apply_move(&mut self, m: Move) {
        let n = self.n;
        match m {
            Move::Hold => {}
            Move::Rotate {
                axis: Axis::Row,
                index: y,
                dir,
            } => {
                let base = y * n;
                let row: Vec<u32> = (0..n).map(|x| self.tile_at[base + x]).collect();
                for x in 0..n {
                    let nx = shift(x, dir, n);
                    let t = row[x];
                    self.tile_at[base + nx] = t;
                    self.pos_of[t as usize] = (base + nx) as u32;
                }
            }
            Move::Rotate {
                axis: Axis::Col,
                index: x,
                dir,
            } => {
                let col: Vec<u32> = (0..n).map(|y| self.tile_at[y * n + x]).collect();
                for y in 0..n {
                    let ny = shift(y, dir, n);
                    let t = col[y];
                    self.tile_at[ny * n + x] = t;
                    self.pos_of[t as usize] = (ny * n + x) as u32;
                }
            }
        }
    }

    pub fn with_move(&self, m: Move) -> GridPerm {
        let mut out = self.clone();
        out.apply_move(m);
        out
    }

    /// Left-to-right composition: the result applies `self` first, then `rhs`.
    pub fn compose(&self, rhs: &GridPerm) -> Result<GridPerm> {
        if self.n != rhs.n {
            return Err(Error::SizeMismatch {
                left: self.n,
                right: rhs.n,
            });
        }
        let cells = self.cells();
        let mut pos_of = vec![0u32; cells];
        let mut tile_at = vec![0u32; cells];
        for t in 0..cells {
            let p = rhs.pos_of[self.pos_of[t] as usize];
            pos_of[t] = p;
            tile_at[p as usize] = t as u32;
        }
        Ok(GridPerm {
            n: self.n,
            tile_at,
            pos_of,
        })
    }

    pub fn invert(&self) -> GridPerm {
        GridPerm {
            n: self.n,
            tile_at: self.pos_of.clone(),
            pos_of: self.tile_at.clone(),
        }
    }

    /// Parity of the permutation: `+1` for even, `-1` for odd.
    pub fn sign(&self) -> i8 {
        sign_of(&self.pos_of)
    }

    /// Tiles moved by this permutation (equivalently, cells whose occupant
    /// differs from the identity arrangement).
    pub fn support(&self) -> Vec<usize> {
        (0..self.cells())
            .filter(|&t| self.pos_of[t] as usize != t)
            .collect()
    }
}

/// Parity of a permutation given in one-line form, by cycle counting.
pub fn sign_of(perm: &[u32]) -> i8 {
    let m = perm.len();
    let mut seen = vec![false; m];
    let mut transpositions = 0usize;
    for start in 0..m {
        if seen[start] {
            continue;
        }
        let mut len = 0usize;
        let mut cur = start;
        while !seen[cur] {
            seen[cur] = true;
            cur = perm[cur] as usize;
            len += 1;
        }
        transpositions += len - 1;
    }
    if transpositions % 2 == 0 {
        1
    } else {
        -1
    }
}

fn shift(i: usize, dir: i8, n: usize) -> usize {
    if dir > 0 {
        (i + 1) % n
    } else {
        (i + n - 1) % n
    }
}

/// The commutator `r^-1 c^-1 r c` of a row rotation and a column rotation:
/// always a 3-cycle supported on an L-shaped triple of cells whose middle
/// cell is the intersection of the row and the column.
pub fn commutator_gamma(r: Move, c: Move, n: usize) -> Result<GridPerm> {
    let (ry, cx) = match (r, c) {
        (
            Move::Rotate {
                axis: Axis::Row,
                index: ry,
                ..
            },
            Move::Rotate {
                axis: Axis::Col,
                index: cx,
                ..
            },
        ) => (ry, cx),
        (Move::Hold, _) | (_, Move::Hold) => return Err(Error::HoldNotAllowed),
        _ => {
            return Err(Error::InvalidParameter(
                "commutator needs one row rotation and one column rotation".into(),
            ))
        }
    };
    debug_assert!(ry < n && cx < n);
    let mut g = GridPerm::identity(n);
    g.apply_move(r.inverse());
    g.apply_move(c.inverse());
    g.apply_move(r);
    g.apply_move(c);
    Ok(g)
}

/// Middle cell of the L for the commutator of row `ry` and column `cx`.
pub fn gamma_middle(r: Move, c: Move, n: usize) -> Result<usize> {
    match (r, c) {
        (
            Move::Rotate {
                axis: Axis::Row,
                index: ry,
                ..
            },
            Move::Rotate {
                axis: Axis::Col,
                index: cx,
                ..
            },
        ) => Ok(ry * n + cx),
        _ => Err(Error::HoldNotAllowed),
    }
}

/// The shell labeling of the grid: every lower-left `l x l` box carries
/// exactly the labels `1..=l^2`.
///
/// Shell `m` is the set of cells with `max(x, y) = m`. The label walk enters
/// the shell at `(0, m)` with label `m^2 + 1`, runs east along the shell top
/// to `(m, m)`, then south down to `(m, 0)` which gets `(m + 1)^2`.
#[derive(Debug, Clone, Copy)]
pub struct Labeling {
    n: usize,
}

impl Labeling {
    pub fn new(n: usize) -> Self {
        Labeling { n }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// 1-based shell label of a cell.
    pub fn to_label(&self, c: Coord) -> Result<usize> {
        if !c.in_range(self.n) {
            return Err(Error::CoordOutOfRange {
                x: c.x,
                y: c.y,
                n: self.n,
            });
        }
        let m = c.x.max(c.y);
        Ok(if c.y == m {
            m * m + 1 + c.x
        } else {
            m * m + 1 + m + (m - c.y)
        })
    }

    pub fn to_coord(&self, label: usize) -> Result<Coord> {
        if label == 0 || label > self.n * self.n {
            return Err(Error::LabelOutOfRange { label, n: self.n });
        }
        let m = int_sqrt(label - 1);
        let r = label - 1 - m * m;
        Ok(if r <= m {
            Coord::new(r, m)
        } else {
            Coord::new(m, 2 * m - r)
        })
    }

    /// 0-based tile id (identity-arrangement cell) of a label.
    pub fn tile_of_label(&self, label: usize) -> Result<usize> {
        Ok(self.to_coord(label)?.index(self.n))
    }
}

fn int_sqrt(v: usize) -> usize {
    let mut m = (v as f64).sqrt() as usize;
    while (m + 1) * (m + 1) <= v {
        m += 1;
    }
    while m * m > v {
        m -= 1;
    }
    m
}

/// Side length `l_k = 2^(k-1) min n` of the k-th nested label box.
pub fn shell_side(k: usize, n: usize) -> usize {
    (1usize << (k - 1)).min(n)
}

/// Label range of the sideways-L region `I_k` (inclusive).
pub fn shell_labels(k: usize, n: usize) -> (usize, usize) {
    let prev = if k == 1 { 0 } else { shell_side(k - 1, n) };
    let cur = shell_side(k, n);
    (prev * prev + 1, cur * cur)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    fn all_rotations(n: usize) -> Vec<Move> {
        let mut v = Vec::new();
        for axis in [Axis::Row, Axis::Col] {
            for index in 0..n {
                for dir in [1i8, -1] {
                    v.push(Move::rotate(axis, index, dir));
                }
            }
        }
        v
    }

    #[test]
    fn labeling_matches_worked_grid() {
        let lab = Labeling::new(4);
        assert_eq!(lab.to_label(Coord::new(0, 0)).unwrap(), 1);
        assert_eq!(lab.to_label(Coord::new(3, 0)).unwrap(), 16);
        assert_eq!(lab.to_label(Coord::new(1, 2)).unwrap(), 6);
        // full n=4 grid, rows from top (y=3) to bottom (y=0)
        let expect = [
            [10, 11, 12, 13],
            [5, 6, 7, 14],
            [2, 3, 8, 15],
            [1, 4, 9, 16],
        ];
        for (row, labels) in expect.iter().enumerate() {
            let y = 3 - row;
            for (x, &l) in labels.iter().enumerate() {
                assert_eq!(lab.to_label(Coord::new(x, y)).unwrap(), l);
            }
        }
    }

    #[test]
    fn labeling_rejects_out_of_range() {
        let lab = Labeling::new(4);
        assert!(lab.to_label(Coord::new(4, 0)).is_err());
        assert!(lab.to_coord(0).is_err());
        assert!(lab.to_coord(17).is_err());
    }

    #[test]
    fn labeling_round_trip_and_box_property() {
        for n in [2usize, 3, 5, 8, 17, 64] {
            let lab = Labeling::new(n);
            for p in 0..n * n {
                let c = Coord::from_index(p, n);
                let l = lab.to_label(c).unwrap();
                assert_eq!(lab.to_coord(l).unwrap(), c);
            }
            for l in 1..=n {
                // lower-left l x l box carries exactly labels 1..=l^2
                for y in 0..n {
                    for x in 0..n {
                        let label = lab.to_label(Coord::new(x, y)).unwrap();
                        assert_eq!(x.max(y) < l, label <= l * l, "n={n} l={l} ({x},{y})");
                    }
                }
            }
        }
    }

    #[test]
    fn hold_is_identity_and_full_cycle_returns() {
        let mut p = GridPerm::identity(4);
        p.apply_move(Move::rotate(Axis::Row, 2, 1));
        let before = p.clone();
        p.apply_move(Move::Hold);
        assert_eq!(p, before);
        let m = Move::rotate(Axis::Col, 1, -1);
        for _ in 0..4 {
            p.apply_move(m);
        }
        assert_eq!(p, before);
    }

    #[test]
    fn row_move_matches_worked_example() {
        // 4x4 grid in the shell labeling; rotating the row carrying labels
        // 2,3,8,15 (y = 1) eastward turns it into 15,2,3,8.
        let n = 4;
        let lab = Labeling::new(n);
        let mut p = GridPerm::identity(n);
        p.apply_move(Move::rotate(Axis::Row, 1, 1));
        let row_labels: Vec<usize> = (0..n)
            .map(|x| {
                let tile = p.tile_at(Coord::new(x, 1).index(n));
                lab.to_label(Coord::from_index(tile, n)).unwrap()
            })
            .collect();
        assert_eq!(row_labels, vec![15, 2, 3, 8]);
        // and every other cell is untouched
        for y in [0usize, 2, 3] {
            for x in 0..n {
                let p_idx = Coord::new(x, y).index(n);
                assert_eq!(p.tile_at(p_idx), p_idx);
            }
        }
    }

    #[test]
    fn compose_basics() {
        let n = 4;
        let mut p = GridPerm::identity(n);
        p.apply_move(Move::rotate(Axis::Row, 1, 1));
        p.apply_move(Move::rotate(Axis::Col, 3, -1));
        let id = GridPerm::identity(n);
        assert_eq!(p.compose(&id).unwrap(), p);
        assert!(p.compose(&p.invert()).unwrap().is_identity());
        assert!(p.compose(&GridPerm::identity(5)).is_err());
    }

    #[test]
    fn compose_matches_sequential_moves() {
        let n = 4;
        let a = GridPerm::identity(n).with_move(Move::rotate(Axis::Row, 0, 1));
        let b = GridPerm::identity(n).with_move(Move::rotate(Axis::Row, 2, -1));
        let composed = a.compose(&b).unwrap();
        let mut stepwise = GridPerm::identity(n);
        stepwise.apply_move(Move::rotate(Axis::Row, 0, 1));
        stepwise.apply_move(Move::rotate(Axis::Row, 2, -1));
        assert_eq!(composed, stepwise);
    }

    #[test]
    fn sign_cases() {
        assert_eq!(GridPerm::identity(4).sign(), 1);
        // one row rotation on n=4 is a 4-cycle, an odd permutation
        let p = GridPerm::identity(4).with_move(Move::rotate(Axis::Row, 1, 1));
        assert_eq!(p.sign(), -1);
        // on n=3 a row rotation is a 3-cycle, an even permutation
        let p = GridPerm::identity(3).with_move(Move::rotate(Axis::Row, 1, 1));
        assert_eq!(p.sign(), 1);
    }

    #[test]
    fn rotation_parity_by_grid_side() {
        for n in [3usize, 4, 5, 6] {
            for m in all_rotations(n) {
                let s = GridPerm::identity(n).with_move(m).sign();
                if n % 2 == 1 {
                    assert_eq!(s, 1);
                } else {
                    assert_eq!(s, -1);
                }
            }
        }
    }

    #[test]
    fn dual_view_stays_consistent_under_random_moves() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let n = 5;
        let rots = all_rotations(n);
        let mut p = GridPerm::identity(n);
        for _ in 0..500 {
            p.apply_move(*rots.choose(&mut rng).unwrap());
            assert!(p.check_consistent());
        }
    }

    #[test]
    fn commutator_is_l_shaped_three_cycle() {
        for n in [3usize, 4, 5] {
            for ry in 0..n {
                for cx in 0..n {
                    for rdir in [1i8, -1] {
                        for cdir in [1i8, -1] {
                            let r = Move::rotate(Axis::Row, ry, rdir);
                            let c = Move::rotate(Axis::Col, cx, cdir);
                            let g = commutator_gamma(r, c, n).unwrap();
                            let sup = g.support();
                            assert_eq!(sup.len(), 3, "n={n} ry={ry} cx={cx}");
                            let middle = gamma_middle(r, c, n).unwrap();
                            assert!(sup.contains(&middle));
                            // order three
                            let g3 = g.compose(&g).unwrap().compose(&g).unwrap();
                            assert!(g3.is_identity());
                            // support forms an L: middle adjacent (on the
                            // torus) to both arms, arms diagonal to each other
                            let mc = Coord::from_index(middle, n);
                            for &s in &sup {
                                if s == middle {
                                    continue;
                                }
                                let sc = Coord::from_index(s, n);
                                let dx = tor_dist(sc.x, mc.x, n);
                                let dy = tor_dist(sc.y, mc.y, n);
                                assert_eq!(dx + dy, 1, "arm must touch middle");
                            }
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn commutator_matches_worked_example() {
        // n=4, the worked example: the row carrying 2,3,8,15 moved right and
        // the column carrying 4,3,6,11 moved through it. In our coordinates
        // that is row y=1 dir +1 and column x=1 dir +1; the three cells that
        // end up differing are the intersection and its east and north
        // neighbors.
        let n = 4;
        let r = Move::rotate(Axis::Row, 1, 1);
        let c = Move::rotate(Axis::Col, 1, 1);
        let g = commutator_gamma(r, c, n).unwrap();
        let mut sup = g.support();
        sup.sort_unstable();
        let mut expect = vec![
            Coord::new(1, 1).index(n),
            Coord::new(2, 1).index(n),
            Coord::new(1, 2).index(n),
        ];
        expect.sort_unstable();
        assert_eq!(sup, expect);
    }

    #[test]
    fn commutator_equals_brute_force_composition() {
        for n in [3usize, 4, 5] {
            for ry in 0..n {
                for cx in 0..n {
                    for rdir in [1i8, -1] {
                        for cdir in [1i8, -1] {
                            let r = Move::rotate(Axis::Row, ry, rdir);
                            let c = Move::rotate(Axis::Col, cx, cdir);
                            let g = commutator_gamma(r, c, n).unwrap();
                            let rp = GridPerm::identity(n).with_move(r);
                            let cp = GridPerm::identity(n).with_move(c);
                            let brute = rp
                                .invert()
                                .compose(&cp.invert())
                                .unwrap()
                                .compose(&rp)
                                .unwrap()
                                .compose(&cp)
                                .unwrap();
                            assert_eq!(g, brute);
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn commutator_rejects_hold() {
        assert!(commutator_gamma(Move::Hold, Move::rotate(Axis::Col, 0, 1), 4).is_err());
    }

    #[test]
    fn shell_regions_partition_labels() {
        for n in [4usize, 6, 8] {
            let m = (n as f64).log2().ceil() as usize;
            let mut covered = vec![false; n * n + 1];
            for k in 1..=m + 1 {
                let (lo, hi) = shell_labels(k, n);
                for l in lo..=hi {
                    assert!(!covered[l]);
                    covered[l] = true;
                }
            }
            assert!(covered[1..].iter().all(|&c| c));
        }
    }

    fn tor_dist(a: usize, b: usize, n: usize) -> usize {
        let d = (a as i64 - b as i64).rem_euclid(n as i64) as usize;
        d.min(n - d)
    }
}
