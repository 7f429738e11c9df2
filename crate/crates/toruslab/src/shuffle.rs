//! Sampling the lazy torus shuffle and its two-step collision form.
//!
//! One step of the lazy chain holds with probability 1/2 and otherwise
//! rotates one of the `2n` lines one unit in a random direction, so each of
//! the `4n` rotations has probability `1/(8n)`. The two-step form replays
//! two drawn moves; whenever the pair is one row rotation and one column
//! rotation it applies row-then-column and then the commutator 3-cycle with
//! probability 1/2, recording the collision.

use crate::grid::{gamma_middle, Axis, Coord, GridPerm, Move};
use crate::stream::ShuffleStream;
use crate::{Error, Result};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

/// Draws one move of the lazy torus shuffle.
pub fn sample_move(n: usize, rng: &mut ChaCha8Rng) -> Move {
    let v = rng.random_range(0..8 * n as u64);
    decode_move(n, v)
}

/// The move encoded by `v` in `0..8n`: the first `4n` values are Hold.
pub fn decode_move(n: usize, v: u64) -> Move {
    let v = v as usize;
    if v < 4 * n {
        return Move::Hold;
    }
    let id = v - 4 * n;
    let axis = if id < 2 * n { Axis::Row } else { Axis::Col };
    let rem = id % (2 * n);
    let index = rem / 2;
    let dir = if rem % 2 == 0 { 1 } else { -1 };
    Move::rotate(axis, index, dir)
}

/// One-step move law as integer weights over denominator `8n`.
pub fn move_law(n: usize) -> Vec<(Move, u64)> {
    let mut law = vec![(Move::Hold, 4 * n as u64)];
    for v in 4 * n as u64..8 * n as u64 {
        law.push((decode_move(n, v), 1));
    }
    law
}

/// Runs `t` steps of the lazy torus shuffle from `start`.
pub fn run_chain(start: &GridPerm, t: u64, stream: ShuffleStream) -> GridPerm {
    let mut rng = stream.rng();
    let mut state = start.clone();
    for _ in 0..t {
        state.apply_move(sample_move(state.n(), &mut rng));
    }
    state
}

/// A recorded 3-collision of the two-step chain.
///
/// `triple` holds the cells of the L in cycle order `(middle, front, back)`:
/// firing sends the content of `middle` to `front`, of `front` to `back`,
/// and of `back` to `middle`. `tiles` is the occupancy of those cells at
/// event time (after the row and column moves, before the cycle).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CollisionEvent {
    pub time: u64,
    pub triple: [usize; 3],
    pub tiles: [u32; 3],
    pub outcome: bool,
}

/// Cells of the 3-cycle fired after applying `r` then `c`, in cycle order
/// `(middle, front, back)`: firing sends the content of `middle` to `front`,
/// of `front` to `back`, and of `back` to `middle`. Because the commutator
/// satisfies `r` then `c` = `c` then `r` then `r^-1 c^-1 r c`, the cycle that
/// turns the applied `r, c` into `c, r` is the inverse of that commutator.
/// O(1); agrees with composing the four moves on the full grid.
pub fn gamma_cells(r: Move, c: Move, n: usize) -> Result<[usize; 3]> {
    let middle = gamma_middle(r, c, n)?;
    let back = gamma_map(middle, r, c, n);
    let front = gamma_map(back, r, c, n);
    debug_assert_ne!(front, middle);
    debug_assert_ne!(back, middle);
    debug_assert_eq!(gamma_map(front, r, c, n), middle);
    Ok([middle, front, back])
}

/// Where the content of cell `p` ends up under `r^-1 c^-1 r c`.
fn gamma_map(p: usize, r: Move, c: Move, n: usize) -> usize {
    let mut cell = Coord::from_index(p, n);
    for m in [r.inverse(), c.inverse(), r, c] {
        if m.touches(cell) {
            let (dx, dy) = m.delta();
            cell = Coord::new(
                (cell.x as i64 + dx).rem_euclid(n as i64) as usize,
                (cell.y as i64 + dy).rem_euclid(n as i64) as usize,
            );
        }
    }
    cell.index(n)
}

/// Splits a drawn pair into the collision case (one row and one column
/// rotation, in either order) or the plain case.
pub fn classify_pair(m1: Move, m2: Move) -> Option<(Move, Move)> {
    match (m1, m2) {
        (
            r @ Move::Rotate {
                axis: Axis::Row, ..
            },
            c @ Move::Rotate {
                axis: Axis::Col, ..
            },
        )
        | (
            c @ Move::Rotate {
                axis: Axis::Col, ..
            },
            r @ Move::Rotate {
                axis: Axis::Row, ..
            },
        ) => Some((r, c)),
        _ => None,
    }
}

/// Deterministic core of the two-step chain: applies the drawn pair
/// (`fired` resolves the collision coin in the mixed case) and reports the
/// collision event, if any, with `time` stamped on it.
pub fn apply_two_step(
    state: &mut GridPerm,
    m1: Move,
    m2: Move,
    fired: bool,
    time: u64,
) -> Option<CollisionEvent> {
    let n = state.n();
    match classify_pair(m1, m2) {
        None => {
            state.apply_move(m1);
            state.apply_move(m2);
            None
        }
        Some((r, c)) => {
            state.apply_move(r);
            state.apply_move(c);
            let triple = gamma_cells(r, c, n).expect("rotations");
            let tiles = [
                state.tile_at(triple[0]) as u32,
                state.tile_at(triple[1]) as u32,
                state.tile_at(triple[2]) as u32,
            ];
            if fired {
                apply_three_cycle(state, triple);
            }
            Some(CollisionEvent {
                time,
                triple,
                tiles,
                outcome: fired,
            })
        }
    }
}

/// Cycles the contents of `cells[0] -> cells[1] -> cells[2] -> cells[0]`.
fn apply_three_cycle(state: &mut GridPerm, cells: [usize; 3]) {
    let moved = GridPerm::from_tile_at(state.n(), {
        let mut v = state.tile_at_view().to_vec();
        v[cells[1]] = state.tile_at(cells[0]) as u32;
        v[cells[2]] = state.tile_at(cells[1]) as u32;
        v[cells[0]] = state.tile_at(cells[2]) as u32;
        v
    })
    .expect("three-cycle keeps a permutation");
    *state = moved;
}

/// One step of the two-step 3-collision chain, drawing from `rng`.
pub fn two_step_3monte(
    state: &mut GridPerm,
    rng: &mut ChaCha8Rng,
    time: u64,
) -> Option<CollisionEvent> {
    let n = state.n();
    let m1 = sample_move(n, rng);
    let m2 = sample_move(n, rng);
    let fired = if classify_pair(m1, m2).is_some() {
        rng.random_range(0..2u32) == 1
    } else {
        false
    };
    apply_two_step(state, m1, m2, fired, time)
}

/// Outcome of tracing the matching of one focus triple.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MatchOutcome {
    pub focus: (usize, usize, usize),
    pub window_start: u64,
    pub t_xyz: Option<u64>,
    /// Front match of `x`; equals `x` when unmatched.
    pub m1: usize,
    /// Back match of `x`; equals `x` when unmatched.
    pub m2: usize,
    /// The focus tile `x` sat in the middle of the L at the matching event.
    pub x_was_middle: bool,
}

impl MatchOutcome {
    pub fn matched(&self) -> bool {
        self.m1 != self.focus.0
    }
}

/// Positions of three tracked tiles under the shuffle, without carrying the
/// rest of the permutation. The move draws are identical to the full chain.
#[derive(Debug, Clone)]
pub struct TrackedTriple {
    n: usize,
    pos: [usize; 3],
}

/// What a two-step collision event looks like from the tracked tiles.
#[derive(Debug, Clone, Copy)]
pub struct TrackedCollision {
    pub triple: [usize; 3],
    pub outcome: bool,
    /// Index into the tracked tiles of the occupant of each L cell, if any.
    pub occupant: [Option<usize>; 3],
}

impl TrackedTriple {
    pub fn new(n: usize, cells: [usize; 3]) -> Result<Self> {
        if cells[0] == cells[1] || cells[0] == cells[2] || cells[1] == cells[2] {
            return Err(Error::DuplicateTiles);
        }
        Ok(TrackedTriple { n, pos: cells })
    }

    pub fn positions(&self) -> [usize; 3] {
        self.pos
    }

    pub fn apply_move(&mut self, m: Move) {
        for p in self.pos.iter_mut() {
            let c = Coord::from_index(*p, self.n);
            if m.touches(c) {
                let (dx, dy) = m.delta();
                *p = Coord::new(
                    (c.x as i64 + dx).rem_euclid(self.n as i64) as usize,
                    (c.y as i64 + dy).rem_euclid(self.n as i64) as usize,
                )
                .index(self.n);
            }
        }
    }

    /// One two-step-chain step; draw-for-draw compatible with
    /// [`two_step_3monte`].
    pub fn two_step(&mut self, rng: &mut ChaCha8Rng) -> Option<TrackedCollision> {
        let m1 = sample_move(self.n, rng);
        let m2 = sample_move(self.n, rng);
        match classify_pair(m1, m2) {
            None => {
                self.apply_move(m1);
                self.apply_move(m2);
                None
            }
            Some((r, c)) => {
                let fired = rng.random_range(0..2u32) == 1;
                self.apply_move(r);
                self.apply_move(c);
                let triple = gamma_cells(r, c, self.n).expect("rotations");
                let mut occupant = [None; 3];
                for (slot, &cell) in triple.iter().enumerate() {
                    for (ti, &p) in self.pos.iter().enumerate() {
                        if p == cell {
                            occupant[slot] = Some(ti);
                        }
                    }
                }
                if fired {
                    for (slot, &cell) in triple.iter().enumerate() {
                        if let Some(ti) = occupant[slot] {
                            let _ = cell;
                            self.pos[ti] = triple[(slot + 1) % 3];
                        }
                    }
                }
                Some(TrackedCollision {
                    triple,
                    outcome: fired,
                    occupant,
                })
            }
        }
    }
}

/// Runs the two-step chain to time `t` from the identity arrangement and
/// applies the matching rule for the focus triple `(x, y, z)` over the
/// window `{window_start, ..., t}`: if the first collision touching any of
/// them is a collision of exactly `(x, y, z)` in cycle order, `y` becomes
/// the front match and `z` the back match of `x`; otherwise `x` stays
/// unmatched.
pub fn trace_matching(
    n: usize,
    focus: (usize, usize, usize),
    window_start: u64,
    t: u64,
    stream: ShuffleStream,
) -> Result<MatchOutcome> {
    let (x, y, z) = focus;
    let mut tracked = TrackedTriple::new(n, [x, y, z])?;
    if window_start < 1 {
        return Err(Error::InvalidParameter(
            "window must start at step 1 or later".into(),
        ));
    }
    let mut rng = stream.rng();
    let mut out = MatchOutcome {
        focus,
        window_start,
        t_xyz: None,
        m1: x,
        m2: x,
        x_was_middle: false,
    };
    for step in 1..=t {
        let before = tracked.positions();
        let event = tracked.two_step(&mut rng);
        let _ = before;
        if step < window_start || out.t_xyz.is_some() {
            continue;
        }
        if let Some(ev) = event {
            let touched = ev.occupant.iter().any(|o| o.is_some());
            if !touched {
                continue;
            }
            out.t_xyz = Some(step);
            // matched iff the L is occupied by exactly (x, y, z) with the
            // cycle carrying x's cell to y's and y's to z's
            if let Some(start) = ev.occupant.iter().position(|o| *o == Some(0)) {
                if ev.occupant[(start + 1) % 3] == Some(1) && ev.occupant[(start + 2) % 3] == Some(2)
                {
                    out.m1 = y;
                    out.m2 = z;
                    out.x_was_middle = start == 0;
                }
            }
        }
    }
    Ok(out)
}

/// Fisher-Yates: a uniform arrangement of cards `0..n`.
pub fn knuth_shuffle(n: usize, rng: &mut ChaCha8Rng) -> Vec<u32> {
    let mut deck: Vec<u32> = (0..n as u32).collect();
    for i in (1..n).rev() {
        let j = rng.random_range(0..=i as u64) as usize;
        deck.swap(i, j);
    }
    deck
}

/// The 3-cycle variant of the Fisher-Yates pass: for each position `i` from
/// the bottom down to the third, a uniformly chosen card from `0..=i` is
/// brought to `i` by a 3-cycle inside `0..=i` (or left alone if already
/// there). The output differs from `start` by an even permutation; started
/// from a sign-balanced law it is exactly uniform.
pub fn modified_knuth_shuffle(start: &[u32], rng: &mut ChaCha8Rng) -> Result<Vec<u32>> {
    let n = start.len();
    if n < 3 {
        return Err(Error::InvalidParameter(
            "modified shuffle needs at least 3 cards".into(),
        ));
    }
    let mut deck = start.to_vec();
    for i in (2..n).rev() {
        let j = rng.random_range(0..=i as u64) as usize;
        modified_knuth_step(&mut deck, i, j);
    }
    Ok(deck)
}

/// One placement step: bring the card at `j` to `i` via the 3-cycle on
/// positions `(j, i, a)` with `a` the smallest position in `{0,1,2}`
/// distinct from both.
pub fn modified_knuth_step(deck: &mut [u32], i: usize, j: usize) {
    if j == i {
        return;
    }
    let a = (0..3).find(|&a| a != i && a != j).expect("free low position");
    // contents move j -> i -> a -> j
    let cj = deck[j];
    let ci = deck[i];
    let ca = deck[a];
    deck[i] = cj;
    deck[a] = ci;
    deck[j] = ca;
}
