//! Enumeration-based ground truth at desk scale.
//!
//! For n ≤ 3 the reachable permutation class is small enough to hold the
//! full law in memory, so mixing quantities can be computed exactly and
//! Monte Carlo estimators elsewhere can be validated against them. The
//! barrier and displacement walks are one-dimensional dynamic programs.

use crate::grid::{GridPerm, Move};
use crate::shuffle::{classify_pair, gamma_cells, move_law};
use crate::{Error, Result};
use std::collections::HashMap;

/// The set of permutations reachable from the identity, with O(1) index
/// lookup and precomputed generator index maps.
///
/// For even n every permutation is reachable; for odd n the rotations are
/// even, so exactly the even half is.
pub struct ReachableClass {
    n: usize,
    members: Vec<u64>,
    index: HashMap<u64, u32>,
    /// `gen_maps[g][s]` = index of the state reached from member `s` by
    /// rotation `g` (same order as the rotation part of [`move_law`]).
    gen_maps: Vec<Vec<u32>>,
}

/// Packs the position-to-tile view into nibbles; valid for n ≤ 3 (≤ 16 tiles).
fn state_key(p: &GridPerm) -> u64 {
    let mut key = 0u64;
    for (i, &t) in p.tile_at_view().iter().enumerate() {
        key |= (t as u64) << (4 * i);
    }
    key
}

fn state_from_key(key: u64, n: usize) -> GridPerm {
    let cells = n * n;
    let tile_at: Vec<u32> = (0..cells)
        .map(|i| ((key >> (4 * i)) & 0xf) as u32)
        .collect();
    GridPerm::from_tile_at(n, tile_at).expect("key came from a permutation")
}

/// BFS from the identity over the 4n rotation generators.
pub fn enumerate_reachable(n: usize) -> Result<ReachableClass> {
    if !(2..=3).contains(&n) {
        return Err(Error::ResourceLimit(format!(
            "full enumeration is only feasible for n in {{2, 3}}, got {n}"
        )));
    }
    let rotations: Vec<Move> = move_law(n)
        .into_iter()
        .filter(|(m, _)| m.is_rotation())
        .map(|(m, _)| m)
        .collect();
    let start = GridPerm::identity(n);
    let mut members = vec![state_key(&start)];
    let mut index = HashMap::from([(members[0], 0u32)]);
    let mut frontier = 0usize;
    while frontier < members.len() {
        let state = state_from_key(members[frontier], n);
        frontier += 1;
        for &m in &rotations {
            let key = state_key(&state.with_move(m));
            if !index.contains_key(&key) {
                index.insert(key, members.len() as u32);
                members.push(key);
            }
        }
    }
    let gen_maps = rotations
        .iter()
        .map(|&m| {
            members
                .iter()
                .map(|&key| index[&state_key(&state_from_key(key, n).with_move(m))])
                .collect()
        })
        .collect();
    Ok(ReachableClass {
        n,
        members,
        index,
        gen_maps,
    })
}

impl ReachableClass {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn member(&self, i: usize) -> GridPerm {
        state_from_key(self.members[i], self.n)
    }

    pub fn index_of(&self, p: &GridPerm) -> Option<usize> {
        self.index.get(&state_key(p)).map(|&i| i as usize)
    }
}

/// Explicit law over the members of a reachable class.
#[derive(Debug, Clone)]
pub struct LawVector {
    pub probs: Vec<f64>,
}

impl LawVector {
    pub fn point_mass_at_identity(class: &ReachableClass) -> Self {
        let mut probs = vec![0.0; class.len()];
        probs[0] = 1.0;
        LawVector { probs }
    }

    pub fn total_mass(&self) -> f64 {
        self.probs.iter().sum()
    }

    /// One lazy-shuffle transition: hold ½, each rotation 1/(8n).
    pub fn step(&mut self, class: &ReachableClass) {
        let rot_w = 1.0 / (8.0 * class.n as f64);
        let mut next: Vec<f64> = self.probs.iter().map(|&p| 0.5 * p).collect();
        for map in &class.gen_maps {
            for (s, &p) in self.probs.iter().enumerate() {
                if p > 0.0 {
                    next[map[s] as usize] += rot_w * p;
                }
            }
        }
        self.probs = next;
    }

    pub fn tv_uniform(&self) -> f64 {
        let u = 1.0 / self.probs.len() as f64;
        0.5 * self.probs.iter().map(|&p| (p - u).abs()).sum::<f64>()
    }

    /// Relative entropy with respect to uniform on the class.
    pub fn ent(&self) -> f64 {
        let v = self.probs.len() as f64;
        self.probs
            .iter()
            .filter(|&&p| p > 0.0)
            .map(|&p| p * (v * p).ln())
            .sum::<f64>()
            .max(0.0)
    }
}

/// Exact law of the lazy shuffle after `t` steps from the identity.
pub fn exact_evolve(class: &ReachableClass, t: u64) -> LawVector {
    let mut law = LawVector::point_mass_at_identity(class);
    for _ in 0..t {
        law.step(class);
    }
    law
}

/// First `t` with `tv(law_t, uniform) ≤ ¼`.
pub fn exact_mixing_time(class: &ReachableClass) -> u64 {
    let mut law = LawVector::point_mass_at_identity(class);
    let mut t = 0u64;
    while law.tv_uniform() > 0.25 {
        law.step(class);
        t += 1;
    }
    t
}

/// An exact rational discrepancy `num / den`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Discrepancy {
    pub num: u64,
    pub den: u64,
}

impl Discrepancy {
    pub fn is_zero(&self) -> bool {
        self.num == 0
    }

    pub fn to_f64(&self) -> f64 {
        self.num as f64 / self.den as f64
    }
}

/// Compares the two-step law of the plain chain with the law of one
/// 3-collision step (row-then-column plus the commutator cycle with
/// probability `gamma_num / gamma_den`), by exact integer-weight
/// enumeration over all ordered move pairs. Both are increment laws of a
/// random walk on the group, so equality of these laws is equality of the
/// kernels. Returns the max absolute difference over resulting
/// permutations; zero exactly when the collision probability is ½.
pub fn two_step_equivalence(n: usize, gamma_num: u64, gamma_den: u64) -> Result<Discrepancy> {
    if n > 3 {
        return Err(Error::ResourceLimit(
            "pair enumeration uses nibble state keys; n ≤ 3".into(),
        ));
    }
    if gamma_num > gamma_den || gamma_den == 0 {
        return Err(Error::InvalidParameter("collision probability > 1".into()));
    }
    let law = move_law(n);
    let mut plain: HashMap<u64, u64> = HashMap::new();
    let mut monte: HashMap<u64, u64> = HashMap::new();
    for &(m1, w1) in &law {
        for &(m2, w2) in &law {
            let w = w1 * w2;
            // plain chain: m1 then m2, over denominator (8n)^2
            let mut p = GridPerm::identity(n);
            p.apply_move(m1);
            p.apply_move(m2);
            *plain.entry(state_key(&p)).or_insert(0) += w * gamma_den;
            // collision chain, over denominator gamma_den * (8n)^2
            match classify_pair(m1, m2) {
                None => {
                    *monte.entry(state_key(&p)).or_insert(0) += w * gamma_den;
                }
                Some((r, c)) => {
                    let mut q = GridPerm::identity(n);
                    q.apply_move(r);
                    q.apply_move(c);
                    *monte.entry(state_key(&q)).or_insert(0) += w * (gamma_den - gamma_num);
                    let cells = gamma_cells(r, c, n)?;
                    let rotated = {
                        let mut v = q.tile_at_view().to_vec();
                        v[cells[1]] = q.tile_at(cells[0]) as u32;
                        v[cells[2]] = q.tile_at(cells[1]) as u32;
                        v[cells[0]] = q.tile_at(cells[2]) as u32;
                        GridPerm::from_tile_at(n, v).expect("3-cycle")
                    };
                    *monte.entry(state_key(&rotated)).or_insert(0) += w * gamma_num;
                }
            }
        }
    }
    let den = gamma_den * (8 * n as u64) * (8 * n as u64);
    let keys: std::collections::HashSet<u64> =
        plain.keys().chain(monte.keys()).copied().collect();
    let num = keys
        .into_iter()
        .map(|k| {
            let a = *plain.get(&k).unwrap_or(&0);
            let b = *monte.get(&k).unwrap_or(&0);
            a.abs_diff(b)
        })
        .max()
        .unwrap_or(0);
    Ok(Discrepancy { num, den })
}

/// Exact law of one tracked tile after `t` steps, started at cell 0. The
/// tile holds with probability `1 − 1/(2n)` and steps to each of its four
/// torus neighbors with probability `1/(8n)`.
pub fn single_tile_evolve(n: usize, t: u64) -> Vec<f64> {
    let cells = n * n;
    let mut probs = vec![0.0; cells];
    probs[0] = 1.0;
    let mut buf = vec![0.0; cells];
    let step_w = 1.0 / (8.0 * n as f64);
    let hold_w = 1.0 - 1.0 / (2.0 * n as f64);
    for _ in 0..t {
        single_tile_step(n, &probs, &mut buf, hold_w, step_w);
        std::mem::swap(&mut probs, &mut buf);
    }
    probs
}

fn single_tile_step(n: usize, probs: &[f64], next: &mut [f64], hold_w: f64, step_w: f64) {
    for (i, slot) in next.iter_mut().enumerate() {
        let x = i % n;
        let y = i / n;
        let west = y * n + (x + n - 1) % n;
        let east = y * n + (x + 1) % n;
        let south = ((y + n - 1) % n) * n + x;
        let north = ((y + 1) % n) * n + x;
        *slot = hold_w * probs[i]
            + step_w * (probs[west] + probs[east] + probs[south] + probs[north]);
    }
}

/// First `t` with the tracked-tile law within ¼ of uniform in total
/// variation.
pub fn single_tile_mixing(n: usize) -> u64 {
    let cells = n * n;
    let u = 1.0 / cells as f64;
    let mut probs = vec![0.0; cells];
    probs[0] = 1.0;
    let mut buf = vec![0.0; cells];
    let step_w = 1.0 / (8.0 * n as f64);
    let hold_w = 1.0 - 1.0 / (2.0 * n as f64);
    let tv = |p: &[f64]| 0.5 * p.iter().map(|&x| (x - u).abs()).sum::<f64>();
    let mut t = 0u64;
    while tv(&probs) > 0.25 {
        single_tile_step(n, &probs, &mut buf, hold_w, step_w);
        std::mem::swap(&mut probs, &mut buf);
        t += 1;
    }
    t
}

/// Exact sub-probability vector of the lazy ±1 walk (hold ½, step ±1 with ¼
/// each) killed on leaving `[-K r, K r]`: entry `y + K r` is
/// `P(Y_N = y, |Y_s| ≤ K r for all s ≤ N)` started from `x`.
pub fn lazy_walk_barrier_dp(r: i64, k: i64, n_steps: u64, x: i64) -> Result<Vec<f64>> {
    if r < 1 || k < 1 {
        return Err(Error::InvalidParameter("need r ≥ 1 and K ≥ 1".into()));
    }
    let bound = k * r;
    if x.abs() > bound {
        return Err(Error::InvalidParameter(format!(
            "start {x} outside barrier ±{bound}"
        )));
    }
    let width = (2 * bound + 1) as usize;
    let mut probs = vec![0.0; width];
    probs[(x + bound) as usize] = 1.0;
    let mut buf = vec![0.0; width];
    for _ in 0..n_steps {
        for (i, slot) in buf.iter_mut().enumerate() {
            let mut v = 0.5 * probs[i];
            if i > 0 {
                v += 0.25 * probs[i - 1];
            }
            if i + 1 < width {
                v += 0.25 * probs[i + 1];
            }
            *slot = v;
        }
        std::mem::swap(&mut probs, &mut buf);
    }
    Ok(probs)
}

/// Minimum of `r · P(Y_N = y, barrier respected)` over `r` in the given
/// range, all `|x|, |y| ≤ r`, and all `N` in `[r², 3r²]`, at buffer
/// constant `K`.
pub fn barrier_min_constant(k: i64, r_lo: i64, r_hi: i64) -> Result<f64> {
    let mut min = f64::INFINITY;
    for r in r_lo..=r_hi {
        for x in -r..=r {
            let bound = (k * r) as usize;
            // evolve once across the whole N range instead of restarting
            let mut probs = lazy_walk_barrier_dp(r, k, (r * r) as u64, x)?;
            let width = probs.len();
            let mut buf = vec![0.0; width];
            for _n in (r * r)..=(3 * r * r) {
                for y in -r..=r {
                    let v = r as f64 * probs[(y + bound as i64) as usize];
                    if v < min {
                        min = v;
                    }
                }
                for (i, slot) in buf.iter_mut().enumerate() {
                    let mut v = 0.5 * probs[i];
                    if i > 0 {
                        v += 0.25 * probs[i - 1];
                    }
                    if i + 1 < width {
                        v += 0.25 * probs[i + 1];
                    }
                    *slot = v;
                }
                std::mem::swap(&mut probs, &mut buf);
            }
        }
    }
    Ok(min)
}

/// Bound-side value of the two-coordinate displacement tail: twice the
/// exact probability that a single coordinate of a tracked tile has moved
/// more than `m` from its start after `s` two-step-chain steps. Each
/// two-step step contributes two regular steps, and per regular step the
/// coordinate moves ±1 with probability `1/(8n)` each.
pub fn displacement_dp(n: usize, s: u64, m: i64) -> Result<f64> {
    if n < 2 || m < 1 {
        return Err(Error::InvalidParameter("need n ≥ 2 and m ≥ 1".into()));
    }
    let steps = 2 * s;
    if steps > 50_000_000 {
        return Err(Error::ResourceLimit("displacement DP too long".into()));
    }
    // track the walk on a window wide enough that truncated mass is
    // negligible; whatever does leak out is lumped into the tail, keeping
    // the returned value an upper bound
    let sigma_reach = 6 * ((steps as f64).sqrt().ceil() as i64) + 8;
    let bound = (m + sigma_reach).min(steps as i64).max(m);
    let width = (2 * bound + 1) as usize;
    let mut probs = vec![0.0; width];
    probs[bound as usize] = 1.0;
    let mut far = 0.0f64;
    let mut buf = vec![0.0; width];
    let step_w = 1.0 / (8.0 * n as f64);
    let hold_w = 1.0 - 2.0 * step_w;
    for _ in 0..steps {
        for (i, slot) in buf.iter_mut().enumerate() {
            let mut v = hold_w * probs[i];
            if i > 0 {
                v += step_w * probs[i - 1];
            }
            if i + 1 < width {
                v += step_w * probs[i + 1];
            }
            *slot = v;
        }
        far += step_w * (probs[0] + probs[width - 1]);
        std::mem::swap(&mut probs, &mut buf);
    }
    let tail: f64 = probs
        .iter()
        .enumerate()
        .filter(|&(i, _)| (i as i64 - bound).abs() > m)
        .map(|(_, &p)| p)
        .sum();
    Ok(2.0 * (tail + far))
}
