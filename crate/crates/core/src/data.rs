//! Databases and the explicit database families used by packing arguments.
//!
//! Families are built by randomized greedy search and then verified
//! exhaustively; a family that falls short of its target size is reported as
//! a [`ConstructionError::Shortfall`] carrying the best family found, never
//! silently padded.

use rand::seq::{IndexedRandom, SliceRandom};
use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::rng;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ConstructionError {
    #[error("invalid construction parameters: {0}")]
    Parameter(String),
    #[error("greedy construction reached {achieved} of {target} members")]
    Shortfall { achieved: usize, target: usize, best: Box<DatabaseFamily> },
}

/// A histogram `x ∈ (Z⁺)^d`; its size is `n = Σ x_i`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct HistogramDatabase {
    pub counts: Vec<u64>,
}

impl HistogramDatabase {
    pub fn new(counts: Vec<u64>) -> Self {
        Self { counts }
    }

    pub fn zeros(d: usize) -> Self {
        Self { counts: vec![0; d] }
    }

    /// `scale · e_index` in dimension `d`.
    pub fn unit(d: usize, index: usize, scale: u64) -> Self {
        let mut counts = vec![0; d];
        counts[index] = scale;
        Self { counts }
    }

    pub fn dim(&self) -> usize {
        self.counts.len()
    }

    pub fn size(&self) -> u64 {
        self.counts.iter().sum()
    }

    pub fn l1_distance(&self, other: &Self) -> u64 {
        assert_eq!(self.dim(), other.dim(), "l1_distance: dimension");
        self.counts.iter().zip(&other.counts).map(|(a, b)| a.abs_diff(*b)).sum()
    }

    pub fn as_f64(&self) -> Vec<f64> {
        self.counts.iter().map(|&c| c as f64).collect()
    }

    /// Uniformly throws `n` elements into `d` bins.
    pub fn random(d: usize, n: u64, rng: &mut rng::Rng) -> Self {
        let mut counts = vec![0; d];
        for _ in 0..n {
            counts[rng.random_range(0..d)] += 1;
        }
        Self { counts }
    }
}

/// A database `x ∈ {0,1}^n`: one element per universe type, present or not.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BitDatabase {
    pub bits: Vec<u8>,
}

impl BitDatabase {
    pub fn new(bits: Vec<u8>) -> Result<Self, ConstructionError> {
        if bits.iter().any(|&b| b > 1) {
            return Err(ConstructionError::Parameter("bit database entries must be 0 or 1".into()));
        }
        Ok(Self { bits })
    }

    pub fn random(n: usize, rng: &mut rng::Rng) -> Self {
        Self { bits: (0..n).map(|_| rng.random_range(0..2u8)).collect() }
    }

    pub fn len(&self) -> usize {
        self.bits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bits.is_empty()
    }

    pub fn as_f64(&self) -> Vec<f64> {
        self.bits.iter().map(|&b| f64::from(b)).collect()
    }

    pub fn to_histogram(&self) -> HistogramDatabase {
        HistogramDatabase::new(self.bits.iter().map(|&b| u64::from(b)).collect())
    }

    pub fn hamming(&self, other: &Self) -> usize {
        self.bits.iter().zip(&other.bits).filter(|(a, b)| a != b).count()
    }
}

/// `n` rows over `d'` binary attributes encoded as ±1, optionally with one
/// column designated as the secret attribute.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AttributeTable {
    n: usize,
    d_prime: usize,
    cells: Vec<i8>,
    hidden_column: Option<usize>,
}

impl AttributeTable {
    pub fn new(rows: Vec<Vec<i8>>, d_prime: usize, hidden_column: Option<usize>) -> Result<Self, ConstructionError> {
        if let Some(h) = hidden_column {
            if h >= d_prime {
                return Err(ConstructionError::Parameter(format!("hidden column {h} >= {d_prime}")));
            }
        }
        let mut cells = Vec::with_capacity(rows.len() * d_prime);
        for (i, r) in rows.iter().enumerate() {
            if r.len() != d_prime {
                return Err(ConstructionError::Parameter(format!("row {i} has {} attributes, expected {d_prime}", r.len())));
            }
            if r.iter().any(|&v| v != 1 && v != -1) {
                return Err(ConstructionError::Parameter(format!("row {i} has an entry outside ±1")));
            }
            cells.extend_from_slice(r);
        }
        Ok(Self { n: rows.len(), d_prime, cells, hidden_column })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn d_prime(&self) -> usize {
        self.d_prime
    }

    pub fn hidden_column(&self) -> Option<usize> {
        self.hidden_column
    }

    pub fn with_hidden_column(mut self, column: usize) -> Result<Self, ConstructionError> {
        if column >= self.d_prime {
            return Err(ConstructionError::Parameter(format!("hidden column {column} >= {}", self.d_prime)));
        }
        self.hidden_column = Some(column);
        Ok(self)
    }

    pub fn get(&self, row: usize, col: usize) -> i8 {
        self.cells[row * self.d_prime + col]
    }

    pub fn set(&mut self, row: usize, col: usize, v: i8) {
        assert!(v == 1 || v == -1);
        self.cells[row * self.d_prime + col] = v;
    }

    pub fn row(&self, row: usize) -> &[i8] {
        &self.cells[row * self.d_prime..(row + 1) * self.d_prime]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[i8]> {
        self.cells.chunks(self.d_prime.max(1)).take(self.n)
    }

    /// Hidden column as bits: `1` where the attribute is `+1`.
    pub fn hidden_bits(&self) -> Option<Vec<u8>> {
        let h = self.hidden_column?;
        Some((0..self.n).map(|r| u8::from(self.get(r, h) == 1)).collect())
    }

    /// The adversary's view: every column except the hidden one.
    pub fn known_part(&self) -> Result<KnownAttributes, ConstructionError> {
        let h = self
            .hidden_column
            .ok_or_else(|| ConstructionError::Parameter("table has no hidden column".into()))?;
        Ok(KnownAttributes {
            n: self.n,
            d_prime: self.d_prime,
            hidden_column: h,
            columns: (0..self.d_prime)
                .filter(|&c| c != h)
                .map(|c| (c, (0..self.n).map(|r| self.get(r, c)).collect()))
                .collect(),
        })
    }

    /// Histogram over the universe `{−1,1}^{d'}`; see [`universe_index`].
    pub fn to_histogram(&self) -> HistogramDatabase {
        assert!(self.d_prime < 32, "universe 2^{} too large", self.d_prime);
        let mut h = HistogramDatabase::zeros(1 << self.d_prime);
        for r in self.rows() {
            h.counts[universe_index(r)] += 1;
        }
        h
    }
}

/// Index of `z ∈ {−1,1}^{d'}` in the universe: attribute `j` is bit
/// `d'−1−j`, set when `z_j = +1`.
pub fn universe_index(z: &[i8]) -> usize {
    z.iter().fold(0, |acc, &v| (acc << 1) | usize::from(v == 1))
}

pub fn universe_element(index: usize, d_prime: usize) -> Vec<i8> {
    (0..d_prime).map(|j| if (index >> (d_prime - 1 - j)) & 1 == 1 { 1 } else { -1 }).collect()
}

/// Known columns of an [`AttributeTable`], keyed by their original index.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct KnownAttributes {
    pub n: usize,
    pub d_prime: usize,
    pub hidden_column: usize,
    pub columns: Vec<(usize, Vec<i8>)>,
}

pub fn random_attribute_table(n: usize, d_prime: usize, seed: u64) -> AttributeTable {
    let mut r = rng::seeded(seed);
    let cells = (0..n * d_prime).map(|_| if r.random_bool(0.5) { 1 } else { -1 }).collect();
    AttributeTable { n, d_prime, cells, hidden_column: None }
}

/// `2^s` histograms with measured pairwise ℓ1 distances.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatabaseFamily {
    pub members: Vec<HistogramDatabase>,
    pub s: u32,
    /// `None` for a singleton family (no pairs).
    pub min_distance: Option<u64>,
    pub max_distance: Option<u64>,
    /// The declared size bound `n'`; every member has size at most this.
    pub size_bound: f64,
}

impl DatabaseFamily {
    /// Keeps the first `2^⌊log2 m⌋` members and measures all pairwise
    /// distances.
    pub fn from_members(mut members: Vec<HistogramDatabase>, size_bound: f64) -> Result<Self, ConstructionError> {
        if members.is_empty() {
            return Err(ConstructionError::Parameter("family must be non-empty".into()));
        }
        let d = members[0].dim();
        if members.iter().any(|m| m.dim() != d) {
            return Err(ConstructionError::Parameter("members differ in dimension".into()));
        }
        if let Some(m) = members.iter().find(|m| m.size() as f64 > size_bound + 1e-9) {
            return Err(ConstructionError::Parameter(format!(
                "member of size {} exceeds bound {size_bound}",
                m.size()
            )));
        }
        let s = members.len().ilog2();
        members.truncate(1 << s);
        let (mut lo, mut hi) = (None::<u64>, None::<u64>);
        for i in 0..members.len() {
            for j in i + 1..members.len() {
                let dist = members[i].l1_distance(&members[j]);
                lo = Some(lo.map_or(dist, |v| v.min(dist)));
                hi = Some(hi.map_or(dist, |v| v.max(dist)));
            }
        }
        Ok(Self { members, s, min_distance: lo, max_distance: hi, size_bound })
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.members[0].dim()
    }

    /// Re-checks every invariant by exhaustive pairwise comparison.
    pub fn verify(&self) -> bool {
        if self.members.len() != 1 << self.s {
            return false;
        }
        if self.members.iter().any(|m| m.size() as f64 > self.size_bound + 1e-9) {
            return false;
        }
        for i in 0..self.members.len() {
            for j in i + 1..self.members.len() {
                let dist = self.members[i].l1_distance(&self.members[j]);
                if self.min_distance.is_some_and(|lo| dist < lo) || self.max_distance.is_some_and(|hi| dist > hi) {
                    return false;
                }
            }
        }
        true
    }
}

#[derive(Debug, Clone, Copy)]
pub struct FamilyOptions {
    pub seed: u64,
    pub restarts: usize,
    /// Hard cap on the target family size.
    pub max_members: usize,
    /// Overrides the construction's own `s` (caller lowering the target).
    pub target_log2: Option<u32>,
}

impl Default for FamilyOptions {
    fn default() -> Self {
        Self { seed: 0, restarts: 50, max_members: 1 << 12, target_log2: None }
    }
}

impl FamilyOptions {
    fn target(&self, natural_log2: u32) -> Result<usize, ConstructionError> {
        let log2 = self.target_log2.unwrap_or(natural_log2);
        if log2 >= usize::BITS - 1 || (1usize << log2) > self.max_members {
            return Err(ConstructionError::Parameter(format!(
                "target family size 2^{log2} exceeds the cap of {} members; lower target_log2",
                self.max_members
            )));
        }
        Ok(1 << log2)
    }
}

/// Randomized greedy binary code of the given length and minimum Hamming
/// distance. Words of length ≤ 20 are scanned exhaustively in random order;
/// longer ones are sampled. Returns the largest code found over all
/// restarts, stopping early once `target` words are reached.
pub fn greedy_binary_code(len: u32, min_distance: u32, target: usize, opts: &FamilyOptions) -> Vec<u128> {
    assert!((1..=128).contains(&len), "code length must be in 1..=128");
    let mask = if len == 128 { u128::MAX } else { (1u128 << len) - 1 };
    let mut best: Vec<u128> = Vec::new();
    for restart in 0..opts.restarts.max(1) {
        let mut r = rng::derived(opts.seed, restart as u64);
        let mut code: Vec<u128> = Vec::with_capacity(target);
        let accept = |w: u128, code: &mut Vec<u128>| {
            if code.iter().all(|c| (c ^ w).count_ones() >= min_distance) {
                code.push(w);
            }
        };
        if len <= 20 {
            let mut words: Vec<u128> = (0..1u128 << len).collect();
            words.shuffle(&mut r);
            for w in words {
                accept(w, &mut code);
                if code.len() >= target {
                    break;
                }
            }
        } else {
            let budget = 50 * target + 1000;
            for _ in 0..budget {
                accept(r.random::<u128>() & mask, &mut code);
                if code.len() >= target {
                    break;
                }
            }
        }
        if code.len() > best.len() {
            best = code;
        }
        if best.len() >= target {
            break;
        }
    }
    best.truncate(target);
    best
}

/// Scaled binary-code family: every member is `⌊1/(4ε)⌋ · (c ∘ 0^{d−d'})`
/// for a codeword `c` of length `d'`, so members have size at most
/// `n = d'/(4ε)` and pairwise ℓ1 distance at least `n/10`.
///
/// The Hamming distance demanded of the code is
/// `max(⌈d'/9⌉, ⌈(n/10)/⌊1/(4ε)⌋⌉)`; the target size is `2^{⌊4d'/5⌋}`.
pub fn build_code_family(d: usize, d_prime: usize, epsilon: f64, opts: &FamilyOptions) -> Result<DatabaseFamily, ConstructionError> {
    if !(epsilon > 0.0 && epsilon <= 1.0 / 40.0) {
        return Err(ConstructionError::Parameter(format!("epsilon {epsilon} outside (0, 1/40]")));
    }
    if d_prime == 0 || d_prime > d || d_prime > 128 {
        return Err(ConstructionError::Parameter(format!("need 1 <= d' <= min(d, 128), got d'={d_prime}, d={d}")));
    }
    let scale = (1.0 / (4.0 * epsilon)).floor() as u64;
    let n = d_prime as f64 / (4.0 * epsilon);
    let hamming = ((d_prime as f64 / 9.0).ceil() as u32)
        .max((n / 10.0 / scale as f64).ceil() as u32)
        .max(1);
    let target = opts.target(((4 * d_prime) / 5) as u32)?;
    let code = greedy_binary_code(d_prime as u32, hamming, target, opts);
    let members: Vec<HistogramDatabase> = code
        .iter()
        .map(|&w| {
            let mut counts = vec![0; d];
            for (j, c) in counts.iter_mut().enumerate().take(d_prime) {
                if (w >> j) & 1 == 1 {
                    *c = scale;
                }
            }
            HistogramDatabase::new(counts)
        })
        .collect();
    finish(members, n, target)
}

/// Combinatorial-design family.
///
/// For `ε < 1`: with `L = log2(d/k)`, sets of size `⌊k/L⌋` pairwise
/// intersecting in at most a quarter of their elements, scaled by an integer
/// `a ≥ L/(160ε)`; members have size at most `k/(80ε)` and pairwise distance
/// at least `k/(160ε)`. Target size `2^{⌊k/20⌋}`.
///
/// For `ε ≥ 1`: 0/1 members with `d' = k`, `n = d'/(4ε)`, sets of size
/// `⌊n⌋` intersecting in at most `⌊4n/5⌋`. Target size `2^{⌊4d'/5⌋}`.
pub fn build_design_family(d: usize, k: usize, epsilon: f64, opts: &FamilyOptions) -> Result<DatabaseFamily, ConstructionError> {
    if !(epsilon > 0.0 && epsilon.is_finite()) {
        return Err(ConstructionError::Parameter(format!("epsilon {epsilon} must be positive")));
    }
    if k == 0 || k > d {
        return Err(ConstructionError::Parameter(format!("need 1 <= k <= d, got k={k}, d={d}")));
    }
    if epsilon < 1.0 {
        let log_ratio = (d as f64 / k as f64).log2();
        if (k as f64) < (d as f64).log2() || 2 * k > d {
            return Err(ConstructionError::Parameter(format!("need log2 d <= k <= d/2, got k={k}, d={d}")));
        }
        let set_size = ((k as f64 / log_ratio).floor() as usize).max(1);
        let rho = set_size / 4;
        let y = log_ratio / (160.0 * epsilon);
        if y < 0.5 {
            return Err(ConstructionError::Parameter(format!(
                "log2(d/k)/(160ε) = {y} < 1/2: no integer scale fits the size budget k/(80ε)"
            )));
        }
        let a = (2.0 * y).floor() as u64;
        let target = opts.target((k / 20) as u32)?;
        let sets = greedy_design(d, set_size, rho, target, opts);
        let size_bound = k as f64 / (80.0 * epsilon);
        finish(design_members(d, &sets, a), size_bound, target)
    } else {
        let n = k as f64 / (4.0 * epsilon);
        let set_size = n.floor() as usize;
        if set_size == 0 {
            return Err(ConstructionError::Parameter(format!("d'/(4ε) = {n} < 1")));
        }
        let rho = ((4.0 * n / 5.0).floor() as usize).min(set_size - 1);
        let target = opts.target(((4 * k) / 5) as u32)?;
        let sets = greedy_design(d, set_size, rho, target, opts);
        finish(design_members(d, &sets, 1), n, target)
    }
}

/// Randomized greedy packing of `set_size`-subsets of `[d]` with pairwise
/// intersections at most `rho`.
pub fn greedy_design(d: usize, set_size: usize, rho: usize, target: usize, opts: &FamilyOptions) -> Vec<Vec<usize>> {
    assert!(set_size <= d, "set size exceeds universe");
    let words = d.div_ceil(64);
    let mut best: Vec<Vec<usize>> = Vec::new();
    let universe: Vec<usize> = (0..d).collect();
    for restart in 0..opts.restarts.max(1) {
        let mut r = rng::derived(opts.seed, restart as u64);
        let mut sets: Vec<Vec<usize>> = Vec::new();
        let mut masks: Vec<Vec<u64>> = Vec::new();
        let budget = 50 * target + 1000;
        for _ in 0..budget {
            let mut cand: Vec<usize> = universe.choose_multiple(&mut r, set_size).copied().collect();
            cand.sort_unstable();
            let mut mask = vec![0u64; words];
            for &e in &cand {
                mask[e / 64] |= 1 << (e % 64);
            }
            let ok = masks
                .iter()
                .all(|m| m.iter().zip(&mask).map(|(a, b)| (a & b).count_ones() as usize).sum::<usize>() <= rho);
            if ok {
                sets.push(cand);
                masks.push(mask);
                if sets.len() >= target {
                    break;
                }
            }
        }
        if sets.len() > best.len() {
            best = sets;
        }
        if best.len() >= target {
            break;
        }
    }
    best
}

/// Characteristic vectors of `sets`, scaled by `a`.
pub fn design_members(d: usize, sets: &[Vec<usize>], a: u64) -> Vec<HistogramDatabase> {
    sets.iter()
        .map(|s| {
            let mut counts = vec![0; d];
            for &e in s {
                counts[e] = a;
            }
            HistogramDatabase::new(counts)
        })
        .collect()
}

fn finish(members: Vec<HistogramDatabase>, size_bound: f64, target: usize) -> Result<DatabaseFamily, ConstructionError> {
    let achieved = members.len();
    let family = DatabaseFamily::from_members(members, size_bound)?;
    if achieved < target {
        return Err(ConstructionError::Shortfall { achieved, target, best: Box::new(family) });
    }
    Ok(family)
}


#[cfg(test)]
mod props {
    use super::*;
    use proptest::prelude::*;

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(1000))]

        #[test]
        fn code_families_verify(d_prime in 1usize..=12, extra in 0usize..8, seed in any::<u64>()) {
            let opts = FamilyOptions { seed, restarts: 3, ..Default::default() };
            let eps = 1.0 / 40.0;
            let family = match build_code_family(d_prime + extra, d_prime, eps, &opts) {
                Ok(f) => f,
                Err(ConstructionError::Shortfall { best, .. }) => *best,
                Err(e) => return Err(TestCaseError::fail(e.to_string())),
            };
            prop_assert!(family.verify());
            let n = d_prime as f64 / (4.0 * eps);
            for m in &family.members {
                prop_assert!(m.counts[d_prime..].iter().all(|&c| c == 0));
            }
            if let Some(lo) = family.min_distance {
                prop_assert!(lo as f64 >= n / 10.0);
            }
        }
    }
}
