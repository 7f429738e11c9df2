//! Finite-distribution entropy toolkit.
//!
//! Natural logarithms throughout. `ENT(p)` is the relative entropy of `p`
//! with respect to the uniform law on its index set, and total variation is
//! the half-sum `tv = ½ Σ|a_i − b_i|`, the convention under which Pinsker's
//! inequality `tv ≤ sqrt(½ ENT)` holds.

use crate::{Error, Result};
use std::collections::HashMap;

/// A probability distribution over a finite index set `0..len`.
#[derive(Debug, Clone, PartialEq)]
pub struct Distribution {
    weights: Vec<f64>,
}

impl Distribution {
    pub fn new(weights: Vec<f64>) -> Result<Self> {
        if weights.is_empty() {
            return Err(Error::InvalidParameter("empty distribution".into()));
        }
        if weights.iter().any(|&w| !w.is_finite() || w < 0.0) {
            return Err(Error::InvalidParameter(
                "weights must be finite and nonnegative".into(),
            ));
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidParameter(format!(
                "weights sum to {total}, not 1"
            )));
        }
        Ok(Distribution { weights })
    }

    /// Normalizes arbitrary nonnegative weights into a distribution.
    pub fn normalized(weights: Vec<f64>) -> Result<Self> {
        let total: f64 = weights.iter().sum();
        if !(total > 0.0) {
            return Err(Error::InvalidParameter("weights sum to zero".into()));
        }
        Distribution::new(weights.iter().map(|w| w / total).collect())
    }

    pub fn uniform(len: usize) -> Self {
        Distribution {
            weights: vec![1.0 / len as f64; len],
        }
    }

    pub fn point_mass(len: usize, at: usize) -> Self {
        let mut weights = vec![0.0; len];
        weights[at] = 1.0;
        Distribution { weights }
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn get(&self, i: usize) -> f64 {
        self.weights[i]
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }
}

/// `Σ a_i log(a_i / b_i)` with `0 log 0 = 0`.
pub fn rel_entropy(a: &Distribution, b: &Distribution) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::SizeMismatch {
            left: a.len(),
            right: b.len(),
        });
    }
    let mut total = 0.0;
    for (i, (&ai, &bi)) in a.weights.iter().zip(&b.weights).enumerate() {
        if ai <= 0.0 {
            continue;
        }
        if bi <= 0.0 {
            return Err(Error::InfiniteDivergence { index: i, mass: ai });
        }
        total += ai * (ai / bi).ln();
    }
    Ok(total.max(0.0))
}

/// Relative entropy with respect to the uniform law: `Σ p log(|V| p)`.
pub fn ent(a: &Distribution) -> f64 {
    let v = a.len() as f64;
    a.weights
        .iter()
        .filter(|&&p| p > 0.0)
        .map(|&p| p * (v * p).ln())
        .sum::<f64>()
        .max(0.0)
}

/// Half-sum total variation distance.
pub fn tv(a: &Distribution, b: &Distribution) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::SizeMismatch {
            left: a.len(),
            right: b.len(),
        });
    }
    Ok(0.5
        * a.weights
            .iter()
            .zip(&b.weights)
            .map(|(&x, &y)| (x - y).abs())
            .sum::<f64>())
}

/// `(tv(a, uniform), sqrt(½ ENT(a)))`; the first never exceeds the second.
pub fn pinsker_gap(a: &Distribution) -> (f64, f64) {
    let u = Distribution::uniform(a.len());
    let t = tv(a, &u).expect("same length");
    (t, (0.5 * ent(a)).sqrt())
}

/// The concavity defect `½ENT(p) + ½ENT(q) − ENT((p+q)/2)`, evaluated
/// pointwise as `Σ ½p log p + ½q log q − ((p+q)/2) log((p+q)/2)`.
pub fn d_distance(p: &Distribution, q: &Distribution) -> Result<f64> {
    if p.len() != q.len() {
        return Err(Error::SizeMismatch {
            left: p.len(),
            right: q.len(),
        });
    }
    let xlogx = |x: f64| if x > 0.0 { x * x.ln() } else { 0.0 };
    let total: f64 = p
        .weights
        .iter()
        .zip(&q.weights)
        .map(|(&pi, &qi)| 0.5 * xlogx(pi) + 0.5 * xlogx(qi) - xlogx(0.5 * (pi + qi)))
        .sum();
    Ok(total.max(0.0))
}

/// Image law under the index map `g` into `0..target_len`.
pub fn pushforward(p: &Distribution, g: &[usize], target_len: usize) -> Result<Distribution> {
    if g.len() != p.len() {
        return Err(Error::SizeMismatch {
            left: g.len(),
            right: p.len(),
        });
    }
    let mut weights = vec![0.0; target_len];
    for (&gi, &pi) in g.iter().zip(&p.weights) {
        if gi >= target_len {
            return Err(Error::InvalidParameter(format!(
                "map value {gi} outside target 0..{target_len}"
            )));
        }
        weights[gi] += pi;
    }
    Distribution::new(weights)
}

/// The empirical constant `d(q, U) · log|V| / ENT(q)` of the d-vs-entropy
/// comparison.
pub fn d_vs_entropy_ratio(q: &Distribution) -> Result<f64> {
    let e = ent(q);
    if e <= 0.0 {
        return Err(Error::ZeroEntropy);
    }
    let u = Distribution::uniform(q.len());
    Ok(d_distance(q, &u)? * (q.len() as f64).ln() / e)
}

/// An explicit probability law on the arrangements of an `m`-card deck.
///
/// Keys are one-line arrangements `deck[pos] = card`, 0-based. Capped at
/// `m = 8` so the support stays fully enumerable.
#[derive(Debug, Clone)]
pub struct PermLaw {
    m: usize,
    support: HashMap<Vec<u8>, f64>,
}

pub const PERM_LAW_MAX_M: usize = 8;

impl PermLaw {
    pub fn new(m: usize, support: HashMap<Vec<u8>, f64>) -> Result<Self> {
        if m > PERM_LAW_MAX_M {
            return Err(Error::ResourceLimit(format!(
                "explicit permutation laws are capped at {PERM_LAW_MAX_M} cards, got {m}"
            )));
        }
        let mut total = 0.0;
        for (perm, &p) in &support {
            if !is_perm(perm, m) {
                return Err(Error::InvalidParameter(format!(
                    "support key {perm:?} is not a permutation of 0..{m}"
                )));
            }
            if !p.is_finite() || p < 0.0 {
                return Err(Error::InvalidParameter(
                    "probabilities must be finite and nonnegative".into(),
                ));
            }
            total += p;
        }
        if (total - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidParameter(format!(
                "probabilities sum to {total}, not 1"
            )));
        }
        Ok(PermLaw { m, support })
    }

    pub fn uniform(m: usize) -> Result<Self> {
        let perms = all_perms(m)?;
        let p = 1.0 / perms.len() as f64;
        PermLaw::new(m, perms.into_iter().map(|perm| (perm, p)).collect())
    }

    pub fn point_mass(perm: Vec<u8>) -> Result<Self> {
        let m = perm.len();
        PermLaw::new(m, HashMap::from([(perm, 1.0)]))
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn support(&self) -> &HashMap<Vec<u8>, f64> {
        &self.support
    }

    /// Relative entropy with respect to the uniform law on `S_m`.
    pub fn ent(&self) -> f64 {
        let size = factorial(self.m) as f64;
        self.support
            .values()
            .filter(|&&p| p > 0.0)
            .map(|&p| p * (size * p).ln())
            .sum::<f64>()
            .max(0.0)
    }
}

fn is_perm(perm: &[u8], m: usize) -> bool {
    if perm.len() != m {
        return false;
    }
    let mut seen = [false; PERM_LAW_MAX_M];
    for &c in perm {
        if c as usize >= m || seen[c as usize] {
            return false;
        }
        seen[c as usize] = true;
    }
    true
}

pub fn factorial(m: usize) -> u64 {
    (1..=m as u64).product()
}

/// All arrangements of `0..m`, in lexicographic order.
pub fn all_perms(m: usize) -> Result<Vec<Vec<u8>>> {
    if m > PERM_LAW_MAX_M {
        return Err(Error::ResourceLimit(format!(
            "cannot enumerate permutations of {m} cards"
        )));
    }
    let mut out = Vec::with_capacity(factorial(m) as usize);
    let mut cur = Vec::with_capacity(m);
    let mut used = vec![false; m];
    fn rec(m: usize, cur: &mut Vec<u8>, used: &mut [bool], out: &mut Vec<Vec<u8>>) {
        if cur.len() == m {
            out.push(cur.clone());
            return;
        }
        for c in 0..m {
            if !used[c] {
                used[c] = true;
                cur.push(c as u8);
                rec(m, cur, used, out);
                cur.pop();
                used[c] = false;
            }
        }
    }
    rec(m, &mut cur, &mut used, &mut out);
    Ok(out)
}

fn perm_sign(perm: &[u8]) -> i8 {
    let as_u32: Vec<u32> = perm.iter().map(|&c| c as u32).collect();
    crate::grid::sign_of(&as_u32)
}

/// The entropy chain-rule split of a permutation law.
#[derive(Debug, Clone)]
pub struct Decomposition {
    /// `ENT` of the sign relative to a fair coin.
    pub sign_term: f64,
    /// `tilde_e[k - 3]` is the expected conditional `ENT` of the card at
    /// position `k` given the cards below it and the sign, for `k = 3..=m`
    /// (positions counted 1-based from the top as in the chain rule).
    pub tilde_e: Vec<f64>,
    /// Expected conditional `ENT` of the top two cards given everything
    /// else; identically zero because sign plus tail determine them.
    pub residual: f64,
}

impl Decomposition {
    pub fn total(&self) -> f64 {
        self.sign_term + self.tilde_e.iter().sum::<f64>() + self.residual
    }
}

/// Splits `ENT(law)` as `sign_term + Σ_{k=3}^{m} tilde_E_k + residual`.
///
/// Conditioning follows the chain rule top-down: reveal the sign, then the
/// cards at positions `m, m−1, …, 3`. Under the uniform reference the card
/// at position `k` given the deeper cards and the sign is uniform over the
/// `k` cards not yet placed, and positions 1–2 are determined.
pub fn entropy_decompose(law: &PermLaw) -> Result<Decomposition> {
    let m = law.m;
    if m < 3 {
        return Err(Error::InvalidParameter(
            "decomposition needs at least 3 cards".into(),
        ));
    }
    // sign term
    let mut sign_mass = [0.0f64; 2];
    for (perm, &p) in &law.support {
        sign_mass[if perm_sign(perm) > 0 { 0 } else { 1 }] += p;
    }
    let xlogx = |x: f64| if x > 0.0 { x * x.ln() } else { 0.0 };
    let sign_term =
        (xlogx(sign_mass[0]) + xlogx(sign_mass[1]) + 2.0f64.ln() * (sign_mass[0] + sign_mass[1]))
            .max(0.0);

    // tilde_E_k: group by (sign, tail below position k), look at the card
    // at position k. 1-based position k is 0-based index k − 1.
    let mut tilde_e = Vec::with_capacity(m - 2);
    for k in 3..=m {
        let mut groups: HashMap<(i8, Vec<u8>), HashMap<u8, f64>> = HashMap::new();
        for (perm, &p) in &law.support {
            if p <= 0.0 {
                continue;
            }
            let key = (perm_sign(perm), perm[k..].to_vec());
            *groups.entry(key).or_default().entry(perm[k - 1]).or_insert(0.0) += p;
        }
        let mut term = 0.0;
        for card_mass in groups.values() {
            let group_p: f64 = card_mass.values().sum();
            // conditional ENT against uniform over the k unplaced cards
            let inner: f64 = card_mass
                .values()
                .map(|&q| {
                    let c = q / group_p;
                    xlogx(c) + c * (k as f64).ln()
                })
                .sum();
            term += group_p * inner.max(0.0);
        }
        tilde_e.push(term);
    }

    // residual: conditional ENT of positions 1-2 given tail_3 and sign;
    // both the law and the uniform reference are the same point mass, so
    // each group contributes 0. Computed anyway as an audit.
    let mut residual = 0.0;
    {
        let mut groups: HashMap<(i8, Vec<u8>), HashMap<Vec<u8>, f64>> = HashMap::new();
        for (perm, &p) in &law.support {
            if p <= 0.0 {
                continue;
            }
            let key = (perm_sign(perm), perm[2..].to_vec());
            *groups
                .entry(key)
                .or_default()
                .entry(perm[..2].to_vec())
                .or_insert(0.0) += p;
        }
        for heads in groups.values() {
            let group_p: f64 = heads.values().sum();
            let inner: f64 = heads.values().map(|&q| xlogx(q / group_p)).sum();
            residual += group_p * inner.max(0.0);
        }
    }

    Ok(Decomposition {
        sign_term,
        tilde_e,
        residual,
    })
}
