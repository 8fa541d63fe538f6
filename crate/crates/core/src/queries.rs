//! Query constructions and the packing certifier.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::data::{universe_index, AttributeTable, DatabaseFamily, HistogramDatabase};
use crate::linalg::{self, Matrix};
use crate::rng;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum QueryError {
    #[error("invalid query parameters: {0}")]
    Parameter(String),
    #[error("counting query entry ({row}, {col}) = {value} outside [-1, 1]")]
    Entry { row: usize, col: usize, value: f64 },
    #[error("database has dimension {got}, query expects {expected}")]
    Dimension { expected: usize, got: usize },
}

/// A map from histograms over a universe of size `dim` to `R^arity`.
pub trait Query: Sync {
    fn arity(&self) -> usize;
    fn dim(&self) -> usize;
    /// Panics on a dimension mismatch; use [`Query::try_evaluate`] for
    /// untrusted input.
    fn evaluate(&self, x: &HistogramDatabase) -> Vec<f64>;

    fn try_evaluate(&self, x: &HistogramDatabase) -> Result<Vec<f64>, QueryError> {
        if x.dim() != self.dim() {
            return Err(QueryError::Dimension { expected: self.dim(), got: x.dim() });
        }
        Ok(self.evaluate(x))
    }
}

/// Linear query `x ↦ Ax` with every `|A_ij| ≤ 1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Matrix", into = "Matrix")]
pub struct CountingQuery {
    matrix: Matrix,
}

impl TryFrom<Matrix> for CountingQuery {
    type Error = QueryError;

    fn try_from(matrix: Matrix) -> Result<Self, QueryError> {
        Self::new(matrix)
    }
}

impl From<CountingQuery> for Matrix {
    fn from(q: CountingQuery) -> Matrix {
        q.matrix
    }
}

impl CountingQuery {
    pub fn new(matrix: Matrix) -> Result<Self, QueryError> {
        for r in 0..matrix.rows() {
            for c in 0..matrix.cols() {
                let value = matrix.get(r, c);
                if value.abs() > 1.0 {
                    return Err(QueryError::Entry { row: r, col: c, value });
                }
            }
        }
        Ok(Self { matrix })
    }

    pub fn matrix(&self) -> &Matrix {
        &self.matrix
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        self.matrix.mul_vec(x)
    }
}

impl Query for CountingQuery {
    fn arity(&self) -> usize {
        self.matrix.rows()
    }

    fn dim(&self) -> usize {
        self.matrix.cols()
    }

    fn evaluate(&self, x: &HistogramDatabase) -> Vec<f64> {
        // Integral inputs: accumulate in i64 so the answer is exact.
        assert_eq!(x.dim(), self.dim(), "counting query: dimension");
        (0..self.arity())
            .map(|r| {
                let row = self.matrix.row(r);
                if row.iter().all(|v| v.fract() == 0.0) {
                    row.iter().zip(&x.counts).map(|(&a, &c)| a as i64 * c as i64).sum::<i64>() as f64
                } else {
                    linalg::dot(row, &x.as_f64())
                }
            })
            .collect()
    }
}

/// `k × d` matrix of i.i.d. uniform ±1 entries.
pub fn random_sign_query(d: usize, k: usize, seed: u64) -> CountingQuery {
    let mut r = rng::seeded(seed);
    let m = Matrix::from_fn(k, d, |_, _| if r.random_bool(0.5) { 1.0 } else { -1.0 });
    CountingQuery { matrix: m }
}

/// Non-counting query built from a bump embedding around anchor databases:
/// `L(z)_i = max(radius − ‖x_i − z‖₁, 0)` and `F(z)_j = Σ_i L(z)_i · r_{j,i}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LipschitzQuery {
    anchors: DatabaseFamily,
    radius: f64,
    signs: Vec<Vec<i8>>,
}

impl LipschitzQuery {
    /// Requires anchors pairwise at least `2·radius` apart, so at most one
    /// bump is active at any input.
    pub fn new(anchors: DatabaseFamily, radius: f64, signs: Vec<Vec<i8>>) -> Result<Self, QueryError> {
        if !(radius > 0.0 && radius.is_finite()) {
            return Err(QueryError::Parameter(format!("radius {radius} must be positive")));
        }
        if let Some(lo) = anchors.min_distance {
            if (lo as f64) < 2.0 * radius {
                return Err(QueryError::Parameter(format!(
                    "anchors {lo} apart overlap bumps of radius {radius}"
                )));
            }
        }
        let m = anchors.len();
        if let Some((j, r)) = signs.iter().enumerate().find(|(_, r)| r.len() != m || r.iter().any(|&v| v != 1 && v != -1)) {
            return Err(QueryError::Parameter(format!(
                "sign row {j} must be a ±1 vector of length {m}, got length {}",
                r.len()
            )));
        }
        Ok(Self { anchors, radius, signs })
    }

    /// Radius `n'/30` and `k` uniformly random sign rows.
    pub fn with_random_signs(anchors: DatabaseFamily, k: usize, seed: u64) -> Result<Self, QueryError> {
        let radius = anchors.size_bound / 30.0;
        Self::with_radius(anchors, radius, k, seed)
    }

    pub fn with_radius(anchors: DatabaseFamily, radius: f64, k: usize, seed: u64) -> Result<Self, QueryError> {
        let mut r = rng::seeded(seed);
        let m = anchors.len();
        let signs = (0..k)
            .map(|_| (0..m).map(|_| if r.random_bool(0.5) { 1 } else { -1 }).collect())
            .collect();
        Self::new(anchors, radius, signs)
    }

    pub fn anchors(&self) -> &DatabaseFamily {
        &self.anchors
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    pub fn signs(&self) -> &[Vec<i8>] {
        &self.signs
    }

    pub fn embed(&self, z: &HistogramDatabase) -> Vec<f64> {
        self.anchors
            .members
            .iter()
            .map(|x| (self.radius - x.l1_distance(z) as f64).max(0.0))
            .collect()
    }

    pub fn combine(&self, embedding: &[f64]) -> Vec<f64> {
        self.signs
            .iter()
            .map(|r| r.iter().zip(embedding).map(|(&s, &l)| f64::from(s) * l).sum())
            .collect()
    }
}

impl Query for LipschitzQuery {
    fn arity(&self) -> usize {
        self.signs.len()
    }

    fn dim(&self) -> usize {
        self.anchors.dim()
    }

    fn evaluate(&self, x: &HistogramDatabase) -> Vec<f64> {
        self.combine(&self.embed(x))
    }
}

/// Fixes `ell` attributes to signs; a row matches iff it agrees on all of
/// them.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Conjunction {
    pub attributes: Vec<usize>,
    pub signs: Vec<i8>,
}

impl Conjunction {
    pub fn matches(&self, row: &[i8]) -> bool {
        self.attributes.iter().zip(&self.signs).all(|(&a, &s)| row[a] == s)
    }

    /// `c ∈ {−1,0,1}^{d'}` rendered as `+`, `0`, `-` per attribute.
    pub fn pattern(&self, d_prime: usize) -> String {
        let mut p = vec!['0'; d_prime];
        for (&a, &s) in self.attributes.iter().zip(&self.signs) {
            p[a] = if s == 1 { '+' } else { '-' };
        }
        p.into_iter().collect()
    }
}

/// All `2^ℓ·C(d', ℓ)` ℓ-way marginals. Order: attribute subsets in
/// lexicographic combination order, then sign patterns with `−1` before
/// `+1`, the first attribute of the subset most significant.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "MarginalShape")]
pub struct MarginalQuery {
    d_prime: usize,
    ell: usize,
    #[serde(skip)]
    conjunctions: Vec<Conjunction>,
}

#[derive(Deserialize)]
struct MarginalShape {
    d_prime: usize,
    ell: usize,
}

impl TryFrom<MarginalShape> for MarginalQuery {
    type Error = QueryError;

    fn try_from(m: MarginalShape) -> Result<Self, QueryError> {
        Self::new(m.d_prime, m.ell)
    }
}

impl MarginalQuery {
    pub fn new(d_prime: usize, ell: usize) -> Result<Self, QueryError> {
        if ell == 0 || ell > d_prime {
            return Err(QueryError::Parameter(format!("need 1 <= ell <= d', got ell={ell}, d'={d_prime}")));
        }
        let mut conjunctions = Vec::new();
        for attributes in combinations(d_prime, ell) {
            for p in 0..1usize << ell {
                let signs = (0..ell).map(|t| if (p >> (ell - 1 - t)) & 1 == 1 { 1 } else { -1 }).collect();
                conjunctions.push(Conjunction { attributes: attributes.clone(), signs });
            }
        }
        Ok(Self { d_prime, ell, conjunctions })
    }

    pub fn d_prime(&self) -> usize {
        self.d_prime
    }

    pub fn ell(&self) -> usize {
        self.ell
    }

    pub fn conjunctions(&self) -> &[Conjunction] {
        &self.conjunctions
    }

    pub fn evaluate_table(&self, table: &AttributeTable) -> Result<Vec<u64>, QueryError> {
        if table.d_prime() != self.d_prime {
            return Err(QueryError::Dimension { expected: self.d_prime, got: table.d_prime() });
        }
        let mut out = vec![0u64; self.conjunctions.len()];
        for row in table.rows() {
            for (o, c) in out.iter_mut().zip(&self.conjunctions) {
                *o += u64::from(c.matches(row));
            }
        }
        Ok(out)
    }

    /// One `c_pattern,count` line per conjunction.
    pub fn to_csv(&self, answers: &[f64]) -> String {
        let mut s = String::from("c_pattern,count\n");
        for (c, a) in self.conjunctions.iter().zip(answers) {
            s.push_str(&format!("{},{}\n", c.pattern(self.d_prime), a));
        }
        s
    }
}

impl Query for MarginalQuery {
    fn arity(&self) -> usize {
        self.conjunctions.len()
    }

    fn dim(&self) -> usize {
        1 << self.d_prime
    }

    /// `x` is a histogram over `{−1,1}^{d'}` indexed by
    /// [`universe_index`](crate::data::universe_index).
    fn evaluate(&self, x: &HistogramDatabase) -> Vec<f64> {
        assert_eq!(x.dim(), self.dim(), "marginal query: dimension");
        let mut out = vec![0u64; self.conjunctions.len()];
        for (idx, &count) in x.counts.iter().enumerate() {
            if count == 0 {
                continue;
            }
            let z = crate::data::universe_element(idx, self.d_prime);
            debug_assert_eq!(universe_index(&z), idx);
            for (o, c) in out.iter_mut().zip(&self.conjunctions) {
                if c.matches(&z) {
                    *o += count;
                }
            }
        }
        out.into_iter().map(|v| v as f64).collect()
    }
}

/// Lexicographic `r`-subsets of `0..n`.
pub fn combinations(n: usize, r: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    if r > n {
        return out;
    }
    let mut idx: Vec<usize> = (0..r).collect();
    loop {
        out.push(idx.clone());
        let Some(i) = (0..r).rev().find(|&i| idx[i] != i + n - r) else {
            return out;
        };
        idx[i] += 1;
        for j in i + 1..r {
            idx[j] = idx[j - 1] + 1;
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PackingClause {
    /// Some member exceeds the size bound `n`.
    Size,
    /// Measured image separation is zero or below the required value.
    Separation,
    /// `Δ > (s−1)/ε`.
    Spread,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PackingCertificate {
    pub s: u32,
    /// Measured maximum pairwise ℓ1 distance; `None` when there are no pairs.
    pub delta: Option<u64>,
    /// Measured minimum pairwise ℓ∞ image distance; `None` when there are no
    /// pairs (read as `+∞`).
    pub eta: Option<f64>,
    pub epsilon: f64,
    pub n: f64,
    pub eta_required: f64,
    pub hypothesis_ok: bool,
    pub violated: Vec<PackingClause>,
    /// `η/2` when the hypotheses hold.
    pub implied_noise_bound: Option<f64>,
}

/// Measures the hypotheses of the packing argument for `family` under
/// `query`: sizes at most `n`, images pairwise `ℓ∞`-separated by at least
/// `eta_required` (and by a positive amount), and `Δ ≤ (s−1)/ε`.
pub fn verify_packing(family: &DatabaseFamily, query: &dyn Query, epsilon: f64, eta_required: f64, n: f64) -> PackingCertificate {
    let images: Vec<Vec<f64>> = family.members.par_iter().map(|x| query.evaluate(x)).collect();
    let m = family.members.len();
    let (delta, eta) = (0..m)
        .into_par_iter()
        .map(|i| {
            let mut lo: Option<f64> = None;
            let mut hi: Option<u64> = None;
            for j in i + 1..m {
                let e = linalg::linf(&linalg::sub(&images[i], &images[j]));
                let d = family.members[i].l1_distance(&family.members[j]);
                lo = Some(lo.map_or(e, |v| v.min(e)));
                hi = Some(hi.map_or(d, |v| v.max(d)));
            }
            (hi, lo)
        })
        .reduce(
            || (None, None),
            |a, b| (opt_merge(a.0, b.0, u64::max), opt_merge(a.1, b.1, f64::min)),
        );

    let mut violated = Vec::new();
    if family.members.iter().any(|x| x.size() as f64 > n) {
        violated.push(PackingClause::Size);
    }
    if let Some(e) = eta {
        if !(e > 0.0 && e >= eta_required) {
            violated.push(PackingClause::Separation);
        }
    }
    if let Some(d) = delta {
        if d as f64 > (f64::from(family.s) - 1.0) / epsilon {
            violated.push(PackingClause::Spread);
        }
    }
    let ok = violated.is_empty();
    PackingCertificate {
        s: family.s,
        delta,
        eta,
        epsilon,
        n,
        eta_required,
        hypothesis_ok: ok,
        violated,
        implied_noise_bound: ok.then(|| eta.map_or(f64::INFINITY, |e| e / 2.0)),
    }
}

fn opt_merge<T: Copy>(a: Option<T>, b: Option<T>, f: impl Fn(T, T) -> T) -> Option<T> {
    match (a, b) {
        (Some(x), Some(y)) => Some(f(x, y)),
        (x, None) => x,
        (None, y) => y,
    }
}

/// Minimum over member pairs of the fraction of query coordinates whose
/// images differ by at least `threshold`; `None` for a singleton family.
pub fn min_separation_fraction(family: &DatabaseFamily, query: &dyn Query, threshold: f64) -> Option<f64> {
    let images: Vec<Vec<f64>> = family.members.iter().map(|x| query.evaluate(x)).collect();
    let k = query.arity() as f64;
    let mut lo: Option<f64> = None;
    for i in 0..images.len() {
        for j in i + 1..images.len() {
            let hits = images[i].iter().zip(&images[j]).filter(|(a, b)| (*a - *b).abs() >= threshold).count();
            let f = hits as f64 / k;
            lo = Some(lo.map_or(f, |v| v.min(f)));
        }
    }
    lo
}

/// The trivial large-universe family: `2^{⌊k/20⌋}` databases
/// `⌊k/(80ε)⌋ · e_i`, requiring `d ≥ 2^{⌊k/20⌋}`.
pub fn unit_vector_family(d: usize, k: usize, epsilon: f64) -> Result<DatabaseFamily, QueryError> {
    let s = (k / 20) as u32;
    if s >= usize::BITS || (1usize << s) > d {
        return Err(QueryError::Parameter(format!("need d >= 2^{s}, got d={d}")));
    }
    let scale = (k as f64 / (80.0 * epsilon)).floor() as u64;
    let members = (0..1usize << s).map(|i| HistogramDatabase::unit(d, i, scale)).collect();
    DatabaseFamily::from_members(members, scale as f64).map_err(|e| QueryError::Parameter(e.to_string()))
}


#[cfg(test)]
mod props {
    use super::*;
    use crate::data::{build_design_family, random_attribute_table, FamilyOptions};
    use proptest::prelude::*;

    fn spread_family(seed: u64) -> DatabaseFamily {
        // Anchors 20 apart with size bound 30: radius 1 bumps never overlap.
        let members = (0..4).map(|i| HistogramDatabase::unit(8, (i + seed as usize) % 8, 10)).collect();
        DatabaseFamily::from_members(members, 30.0).unwrap()
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(1000))]

        #[test]
        fn embedding_is_one_lipschitz(counts in proptest::collection::vec(0u64..12, 8), j in 0usize..8, up in any::<bool>(), seed in 0u64..8) {
            let q = LipschitzQuery::with_radius(spread_family(seed), 5.0, 3, seed).unwrap();
            let z1 = HistogramDatabase::new(counts);
            let mut z2 = z1.clone();
            if up { z2.counts[j] += 1 } else if z2.counts[j] > 0 { z2.counts[j] -= 1 }
            let gap = linalg::l1(&linalg::sub(&q.embed(&z1), &q.embed(&z2)));
            prop_assert!(gap <= 1.0 + 1e-12);
        }

        #[test]
        fn embedding_activates_one_bump(counts in proptest::collection::vec(0u64..12, 8), seed in 0u64..8) {
            let q = LipschitzQuery::with_radius(spread_family(seed), 10.0, 3, seed).unwrap();
            let active = q.embed(&HistogramDatabase::new(counts)).iter().filter(|&&v| v > 0.0).count();
            prop_assert!(active <= 1);
        }

        #[test]
        fn counting_queries_are_coordinatewise_lipschitz(counts in proptest::collection::vec(0u64..20, 6), i in 0usize..6, seed in any::<u64>()) {
            let q = random_sign_query(6, 5, seed);
            let x = HistogramDatabase::new(counts);
            let mut y = x.clone();
            y.counts[i] += 1;
            let (fx, fy) = (q.evaluate(&x), q.evaluate(&y));
            for j in 0..5 {
                prop_assert!(((fy[j] - fx[j]).abs() - q.matrix().get(j, i).abs()).abs() < 1e-12);
                prop_assert!((fy[j] - fx[j]).abs() <= 1.0);
            }
        }

        #[test]
        fn marginal_settings_partition_rows(n in 0usize..30, d_prime in 1usize..6, ell_seed in any::<usize>(), seed in any::<u64>()) {
            let ell = 1 + ell_seed % d_prime;
            let t = random_attribute_table(n, d_prime, seed);
            let q = MarginalQuery::new(d_prime, ell).unwrap();
            let a = q.evaluate_table(&t).unwrap();
            for block in a.chunks(1 << ell) {
                prop_assert_eq!(block.iter().sum::<u64>(), n as u64);
            }
        }
    }

    #[test]
    fn design_family_separation_event() {
        // k = 40 >= 20·s for s = 2; the event must hold for all pairs on at
        // least 95% of seeds.
        let eps = 1.0 / 40.0;
        let opts = FamilyOptions { target_log2: Some(2), ..Default::default() };
        let family = build_design_family(64, 16, eps, &opts).unwrap();
        let a = family.members[0].counts.iter().copied().max().unwrap() as f64;
        let big_delta = family.min_distance.unwrap() as f64;
        let threshold = (big_delta * a).sqrt() / 10.0;
        let k = 40;
        let seeds = 200;
        let held = (0..seeds)
            .filter(|&s| min_separation_fraction(&family, &random_sign_query(64, k, s), threshold).unwrap() >= 1.0 / 40.0)
            .count();
        assert!(held as f64 >= 0.95 * seeds as f64, "{held}/{seeds}");
    }
}
