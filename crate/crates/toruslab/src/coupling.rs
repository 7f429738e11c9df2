//! The master-tile construction of the torus shuffle and its companion
//! processes, with the counters and martingale diagnostics used to bound
//! interference.
//!
//! The shuffle is rebuilt move-for-move from per-tile random-walk increment
//! sequences: each non-lazy step picks one of `n` master tiles (one per row
//! and column) uniformly and moves it along its own sequence, dragging its
//! line. The oblivious process `Y` moves the focus tiles at the same times
//! but always along their own sequences, and the idealized endpoint `W`
//! applies exactly `l²` increments per tile. Differences are charged to
//! steps where a focus tile shares a line with a higher-priority one.

use crate::grid::Coord;
use crate::mc::{map_trials, EstimateReport};
use crate::stream::ShuffleStream;
use crate::{Error, Result};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

/// Counters and endpoints of one coupled run; focus order is `(i, j, k)`.
#[derive(Debug, Clone)]
pub struct TrajectoryStats {
    pub steps: u64,
    pub x_end: [Coord; 3],
    pub y_end: [Coord; 3],
    /// Present only when `steps = 2 l² n` for an integer `l`.
    pub w_end: Option<[Coord; 3]>,
    /// Total moves per focus tile.
    pub moves: [u64; 3],
    /// Moves made while not a master tile (interference); zero for `i`.
    pub interference: [u64; 3],
    /// Steps on which `k` shared a line with `i`, `k` with `j`, `j` with
    /// `i`, and `k` with either.
    pub a_ki: u64,
    pub a_kj: u64,
    pub a_ji: u64,
    pub a_k: u64,
    /// Number of wrap-around epochs of the `(i, k)` difference walk
    /// (one more than the number of wrap events before `steps`).
    pub wrap_count: u64,
    pub tau_esc: Option<u64>,
    /// `M_{t∧τ} − M_0` where `M_t = |D(t)|₁ − A^{k,i}_t / (2n)`.
    pub m_stopped_delta: f64,
    /// `V₁(t∧τ) − V₁(0)` where `V₁(t) = D₁(t)² − t / (2n)`.
    pub v1_stopped_delta: f64,
    /// `|Z(t)|₂² − 2 N_t^k` at the horizon, `Z = X(k) − Y(k)` unwrapped.
    pub z_super_end: f64,
    pub z_norm: f64,
}

/// One cell per row and per column: `i`'s cell always; `j`'s unless it
/// shares a line with `i`; `k`'s unless it shares a line with `i` or `j`.
/// The remaining rows are completed deterministically (increasing rows,
/// lowest feasible column) while never landing on the cell of a focus tile
/// that was excluded, since an excluded focus tile must not be a master.
pub fn select_master_cells(n: usize, pos: [usize; 3]) -> Vec<usize> {
    let coords: Vec<Coord> = pos.iter().map(|&p| Coord::from_index(p, n)).collect();
    let (pi, pj, pk) = (coords[0], coords[1], coords[2]);
    let mut chosen: Vec<Coord> = vec![pi];
    let mut forbidden: Vec<usize> = Vec::new();
    if pj.x != pi.x && pj.y != pi.y {
        chosen.push(pj);
    } else {
        forbidden.push(pj.index(n));
    }
    if [pi, pj].iter().all(|c| pk.x != c.x && pk.y != c.y) {
        chosen.push(pk);
    } else {
        forbidden.push(pk.index(n));
    }
    let mut row_used = vec![false; n];
    let mut col_used = vec![false; n];
    for c in &chosen {
        row_used[c.y] = true;
        col_used[c.x] = true;
    }
    let free_rows: Vec<usize> = (0..n).filter(|&y| !row_used[y]).collect();
    let mut cells: Vec<usize> = chosen.iter().map(|c| c.index(n)).collect();
    let mut completion = Vec::with_capacity(free_rows.len());
    let ok = complete_rows(&free_rows, &mut col_used, &forbidden, n, &mut completion);
    debug_assert!(ok, "a row/column completion always exists for n >= 2");
    cells.extend(completion);
    cells
}

/// Fills `out` with one cell per row of `rows` (in order), each in a
/// distinct free column, skipping `forbidden` cells; lowest columns are
/// preferred and the rare dead end is resolved by backtracking.
fn complete_rows(
    rows: &[usize],
    col_used: &mut [bool],
    forbidden: &[usize],
    n: usize,
    out: &mut Vec<usize>,
) -> bool {
    let Some((&y, rest)) = rows.split_first() else {
        return true;
    };
    for x in 0..n {
        if col_used[x] || forbidden.contains(&(y * n + x)) {
            continue;
        }
        col_used[x] = true;
        out.push(y * n + x);
        if complete_rows(rest, col_used, forbidden, n, out) {
            return true;
        }
        out.pop();
        col_used[x] = false;
    }
    false
}

/// Master tiles for a full grid state: the tiles occupying the master
/// cells chosen for the current focus positions.
pub fn select_master_tiles(p: &crate::grid::GridPerm, focus: (usize, usize, usize)) -> Vec<usize> {
    let pos = [p.pos_of(focus.0), p.pos_of(focus.1), p.pos_of(focus.2)];
    select_master_cells(p.n(), pos)
        .into_iter()
        .map(|cell| p.tile_at(cell))
        .collect()
}

/// Lazily generated increment sequence of one focus tile, shared by the
/// three processes.
struct IncrementSeq {
    rng: ChaCha8Rng,
    drawn: Vec<(i64, i64)>,
}

impl IncrementSeq {
    fn new(rng: ChaCha8Rng) -> Self {
        IncrementSeq { rng, drawn: Vec::new() }
    }

    /// 1-based increment `m_q`.
    fn get(&mut self, q: u64) -> (i64, i64) {
        while (self.drawn.len() as u64) < q {
            let d = match self.rng.random_range(0..4u32) {
                0 => (1, 0),
                1 => (-1, 0),
                2 => (0, 1),
                _ => (0, -1),
            };
            self.drawn.push(d);
        }
        self.drawn[(q - 1) as usize]
    }

    fn prefix_sum(&mut self, q: u64) -> (i64, i64) {
        self.get(q.max(1));
        self.drawn[..q as usize]
            .iter()
            .fold((0, 0), |acc, d| (acc.0 + d.0, acc.1 + d.1))
    }
}

fn centered_diff(a: usize, b: usize, n: usize) -> i64 {
    let mut d = (a as i64 - b as i64).rem_euclid(n as i64);
    if 2 * d > n as i64 {
        d -= n as i64;
    }
    d
}

/// Runs `t` steps of the master-tile shuffle for focus tiles starting at
/// the cells `focus` (identity arrangement), tracking the oblivious and
/// idealized companions and all interference counters.
pub fn run_coupled(
    n: usize,
    t: u64,
    focus: (usize, usize, usize),
    stream: ShuffleStream,
) -> Result<TrajectoryStats> {
    if n < 4 {
        return Err(Error::InvalidParameter(
            "the master-tile construction needs n ≥ 4".into(),
        ));
    }
    let start = [focus.0, focus.1, focus.2];
    if start[0] == start[1] || start[0] == start[2] || start[1] == start[2] {
        return Err(Error::DuplicateTiles);
    }
    if start.iter().any(|&p| p >= n * n) {
        return Err(Error::InvalidParameter("focus cell out of range".into()));
    }
    let mut rng = stream.rng();
    let mut incs = [
        IncrementSeq::new(stream.substream(1)),
        IncrementSeq::new(stream.substream(2)),
        IncrementSeq::new(stream.substream(3)),
    ];
    let mut pos = start;
    let mut moves = [0u64; 3];
    let mut interference = [0u64; 3];
    let (mut a_ki, mut a_kj, mut a_ji, mut a_k) = (0u64, 0u64, 0u64, 0u64);

    // unwrapped (i, k) difference walk and its stopped diagnostics
    let mut d = (
        centered_diff(pos[0] % n, pos[2] % n, n),
        centered_diff(pos[0] / n, pos[2] / n, n),
    );
    let d0 = d;
    let mut tau_esc: Option<u64> = None;
    let mut wrap_events = 0u64;
    let mut m_stopped_delta = 0.0f64;
    let mut v1_stopped_delta = 0.0f64;

    // Z = X(k) − Y(k), unwrapped
    let mut z = (0i64, 0i64);

    let share_line = |a: usize, b: usize| a % n == b % n || a / n == b / n;
    let two_n = 2.0 * n as f64;

    for step in 0..t {
        // line-sharing counters read the state at this time index
        let ki = share_line(pos[2], pos[0]);
        let kj = share_line(pos[2], pos[1]);
        if ki {
            a_ki += 1;
        }
        if kj {
            a_kj += 1;
        }
        if share_line(pos[1], pos[0]) {
            a_ji += 1;
        }
        if ki || kj {
            a_k += 1;
        }

        // lazy coin
        let mut deltas = [(0i64, 0i64); 3];
        if rng.random_range(0..2u32) == 0 {
            let masters = select_master_cells(n, pos);
            let chosen = masters[rng.random_range(0..n as u64) as usize];
            let master_focus = (0..3).find(|&f| pos[f] == chosen);
            let (dx, dy) = match master_focus {
                Some(f) => incs[f].get(moves[f] + 1),
                None => match rng.random_range(0..4u32) {
                    0 => (1, 0),
                    1 => (-1, 0),
                    2 => (0, 1),
                    _ => (0, -1),
                },
            };
            // the rotated line is the master cell's row or column
            let line_row = dy == 0;
            for f in 0..3 {
                let on_line = if line_row {
                    pos[f] / n == chosen / n
                } else {
                    pos[f] % n == chosen % n
                };
                if !on_line {
                    continue;
                }
                deltas[f] = (dx, dy);
                let x = (pos[f] as i64 % n as i64 + dx).rem_euclid(n as i64);
                let y = (pos[f] as i64 / n as i64 + dy).rem_euclid(n as i64);
                pos[f] = (y * n as i64 + x) as usize;
                moves[f] += 1;
                let is_master = master_focus == Some(f);
                if !is_master {
                    interference[f] += 1;
                }
                if f == 2 {
                    let m = incs[2].get(moves[2]);
                    z.0 += dx - m.0;
                    z.1 += dy - m.1;
                }
            }
        }

        // difference walk of (i, k)
        if tau_esc.is_none() {
            d.0 += deltas[0].0 - deltas[2].0;
            d.1 += deltas[0].1 - deltas[2].1;
            let elapsed = step + 1;
            if d.0.unsigned_abs() as usize == n || d.1.unsigned_abs() as usize == n {
                tau_esc = Some(elapsed);
                wrap_events += 1;
                m_stopped_delta = (d.0.abs() + d.1.abs()) as f64
                    - a_ki as f64 / two_n
                    - (d0.0.abs() + d0.1.abs()) as f64;
                v1_stopped_delta =
                    (d.0 * d.0 - d0.0 * d0.0) as f64 - elapsed as f64 / two_n;
                // next epoch restarts from the current positions
                d = (
                    centered_diff(pos[0] % n, pos[2] % n, n),
                    centered_diff(pos[0] / n, pos[2] / n, n),
                );
            }
        } else {
            d.0 += deltas[0].0 - deltas[2].0;
            d.1 += deltas[0].1 - deltas[2].1;
            if d.0.unsigned_abs() as usize == n || d.1.unsigned_abs() as usize == n {
                wrap_events += 1;
                d = (
                    centered_diff(pos[0] % n, pos[2] % n, n),
                    centered_diff(pos[0] / n, pos[2] / n, n),
                );
            }
        }
    }

    if tau_esc.is_none() {
        m_stopped_delta =
            (d.0.abs() + d.1.abs()) as f64 - a_ki as f64 / two_n - (d0.0.abs() + d0.1.abs()) as f64;
        v1_stopped_delta = (d.0 * d.0 - d0.0 * d0.0) as f64 - t as f64 / two_n;
    }

    let y_end = {
        let mut out = [Coord::new(0, 0); 3];
        for f in 0..3 {
            let (sx, sy) = if moves[f] == 0 {
                (0, 0)
            } else {
                incs[f].prefix_sum(moves[f])
            };
            out[f] = wrap_coord(start[f], sx, sy, n);
        }
        out
    };
    // W exists when t = 2 l² n for integer l
    let w_end = if t % (2 * n as u64) == 0 {
        let l2 = t / (2 * n as u64);
        let l = (l2 as f64).sqrt().round() as u64;
        if l > 0 && l * l == l2 {
            let mut out = [Coord::new(0, 0); 3];
            for f in 0..3 {
                let (sx, sy) = incs[f].prefix_sum(l2);
                out[f] = wrap_coord(start[f], sx, sy, n);
            }
            Some(out)
        } else {
            None
        }
    } else {
        None
    };

    let n_k = interference[2];
    Ok(TrajectoryStats {
        steps: t,
        x_end: [
            Coord::from_index(pos[0], n),
            Coord::from_index(pos[1], n),
            Coord::from_index(pos[2], n),
        ],
        y_end,
        w_end,
        moves,
        interference,
        a_ki,
        a_kj,
        a_ji,
        a_k,
        wrap_count: wrap_events + 1,
        tau_esc,
        m_stopped_delta,
        v1_stopped_delta,
        z_super_end: (z.0 * z.0 + z.1 * z.1) as f64 - 2.0 * n_k as f64,
        z_norm: ((z.0 * z.0 + z.1 * z.1) as f64).sqrt(),
    })
}

fn wrap_coord(start_cell: usize, sx: i64, sy: i64, n: usize) -> Coord {
    let x = (start_cell as i64 % n as i64 + sx).rem_euclid(n as i64) as usize;
    let y = (start_cell as i64 / n as i64 + sy).rem_euclid(n as i64) as usize;
    Coord::new(x, y)
}

/// Mean and standard error of a sample.
fn mean_se(values: &[f64]) -> (f64, f64) {
    let m = values.len() as f64;
    let mean = values.iter().sum::<f64>() / m;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (m - 1.0).max(1.0);
    (mean, (var / m).sqrt())
}

/// Monte-Carlo check of the interference bounds at `t = 2 l² n`.
#[derive(Debug, Clone)]
pub struct InterferenceReport {
    pub n: usize,
    pub l: usize,
    pub trials: u64,
    /// Mean and standard error of `A^k / (2n)`.
    pub a_k_scaled: (f64, f64),
    /// The bound `128 l`.
    pub a_k_bound: f64,
    pub wrap_mean: (f64, f64),
    pub n_k_mean: (f64, f64),
    /// Mean of `A^k / (2n)` again, as the predicted `E N^k`.
    pub n_k_predicted: f64,
    pub a_bound_ok: bool,
    pub wrap_bound_ok: bool,
}

/// Default focus starts: the first three label cells of the box.
pub fn default_focus(n: usize) -> (usize, usize, usize) {
    let lab = crate::grid::Labeling::new(n);
    (
        lab.tile_of_label(1).expect("in range"),
        lab.tile_of_label(2).expect("in range"),
        lab.tile_of_label(3).expect("in range"),
    )
}

pub fn interference_bound_check(
    n: usize,
    l: usize,
    trials: u64,
    seed: u64,
) -> Result<InterferenceReport> {
    if l < 2 || l > n {
        return Err(Error::InvalidParameter("need 2 ≤ l ≤ n".into()));
    }
    let t = 2 * (l * l) as u64 * n as u64;
    let focus = default_focus(n);
    let runs: Vec<(f64, f64, f64)> = map_trials(trials, |trial| {
        let stats = run_coupled(n, t, focus, ShuffleStream::new(seed, trial))
            .expect("valid parameters");
        debug_assert!(stats.a_k <= stats.a_ki + stats.a_kj);
        (
            stats.a_k as f64 / (2.0 * n as f64),
            stats.wrap_count as f64,
            stats.interference[2] as f64,
        )
    });
    let a: Vec<f64> = runs.iter().map(|r| r.0).collect();
    let w: Vec<f64> = runs.iter().map(|r| r.1).collect();
    let nk: Vec<f64> = runs.iter().map(|r| r.2).collect();
    let a_k_scaled = mean_se(&a);
    let wrap_mean = mean_se(&w);
    let n_k_mean = mean_se(&nk);
    let a_k_bound = 128.0 * l as f64;
    Ok(InterferenceReport {
        n,
        l,
        trials,
        a_k_scaled,
        a_k_bound,
        wrap_mean,
        n_k_mean,
        n_k_predicted: a_k_scaled.0,
        a_bound_ok: a_k_scaled.0 + 3.0 * a_k_scaled.1 <= a_k_bound,
        wrap_bound_ok: wrap_mean.0 + 3.0 * wrap_mean.1 <= 32.0,
    })
}

/// Empirical drift of the stopped martingale `M`, the supermartingale
/// `V₁`, and the supermartingale `|Z|² − 2N^k`.
#[derive(Debug, Clone)]
pub struct MartingaleReport {
    pub trials: u64,
    pub m_delta: (f64, f64),
    pub v1_delta: (f64, f64),
    pub z_super: (f64, f64),
    pub m_ok: bool,
    pub v1_ok: bool,
    pub z_ok: bool,
}

pub fn martingale_drift_check(
    n: usize,
    t: u64,
    trials: u64,
    seed: u64,
) -> Result<MartingaleReport> {
    let focus = default_focus(n);
    let runs: Vec<(f64, f64, f64)> = map_trials(trials, |trial| {
        let stats =
            run_coupled(n, t, focus, ShuffleStream::new(seed, trial)).expect("valid parameters");
        (stats.m_stopped_delta, stats.v1_stopped_delta, stats.z_super_end)
    });
    let m = mean_se(&runs.iter().map(|r| r.0).collect::<Vec<_>>());
    let v1 = mean_se(&runs.iter().map(|r| r.1).collect::<Vec<_>>());
    let z = mean_se(&runs.iter().map(|r| r.2).collect::<Vec<_>>());
    Ok(MartingaleReport {
        trials,
        m_delta: m,
        v1_delta: v1,
        z_super: z,
        m_ok: m.0.abs() <= 3.0 * m.1,
        v1_ok: v1.0 <= 3.0 * v1.1,
        z_ok: z.0 <= 3.0 * z.1,
    })
}

/// Axis-aligned torus box given by a real center and side length; bounds
/// round outward.
#[derive(Debug, Clone, Copy)]
pub struct TorusBox {
    pub center: (f64, f64),
    pub side: f64,
}

impl TorusBox {
    pub fn contains(&self, c: Coord, n: usize) -> bool {
        let half = self.side / 2.0;
        let dist = |a: f64, b: f64| {
            let d = (a - b).rem_euclid(n as f64);
            d.min(n as f64 - d)
        };
        dist(c.x as f64, self.center.0) <= half && dist(c.y as f64, self.center.1) <= half
    }
}

/// The three Stage-1 target boxes: side `c l`, centered on the
/// anti-diagonal thirds of the `l x l` box.
pub fn stage1_boxes(l: usize, c: f64) -> Result<[TorusBox; 3]> {
    let lf = l as f64;
    let side = c * lf;
    if side < 1.0 {
        return Err(Error::DegenerateBox { side });
    }
    Ok([
        TorusBox {
            center: (lf / 6.0, 5.0 * lf / 6.0),
            side,
        },
        TorusBox {
            center: (lf / 2.0, lf / 2.0),
            side,
        },
        TorusBox {
            center: (5.0 * lf / 6.0, lf / 6.0),
            side,
        },
    ])
}

/// Numerical form of the buffer-constant condition
/// `e^{-(1/3)(2K-1)²} ≤ 1/(2e√3)`.
pub fn buffer_constant_ok(k: f64) -> bool {
    (-(2.0 * k - 1.0).powi(2) / 3.0).exp() <= 1.0 / (2.0 * std::f64::consts::E * 3.0f64.sqrt())
}

/// Estimates the probability that all three focus tiles land in their
/// Stage-1 boxes after `2 l² n` steps.
pub fn stage1_success(
    n: usize,
    l: usize,
    c: f64,
    trials: u64,
    seed: u64,
) -> Result<EstimateReport> {
    if l < 2 || l > n {
        return Err(Error::InvalidParameter("need 2 ≤ l ≤ n".into()));
    }
    let boxes = stage1_boxes(l, c)?;
    let t = 2 * (l * l) as u64 * n as u64;
    let focus = default_focus(n);
    let started = std::time::Instant::now();
    let hits: Vec<bool> = map_trials(trials, |trial| {
        let stats =
            run_coupled(n, t, focus, ShuffleStream::new(seed, trial)).expect("valid parameters");
        (0..3).all(|f| boxes[f].contains(stats.x_end[f], n))
    });
    let successes = hits.iter().filter(|&&h| h).count() as u64;
    Ok(EstimateReport::from_bernoulli(
        successes,
        trials,
        seed,
        started.elapsed().as_secs_f64(),
    ))
}
