//! Reconstruction attacks.

use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::data::{BitDatabase, HistogramDatabase, KnownAttributes};
use crate::linalg::{self, hadamard_row_product, LinalgError, Matrix, NormOrder, ProjectedNorm};
use crate::lp::{minimize_l1_residual_with, LpError, LpOptions};
use crate::mechanisms::{MechanismError, NoisyRelease};
use crate::queries::{CountingQuery, MarginalQuery, Query, QueryError};
use crate::rng;

#[derive(Debug, Error)]
pub enum AttackError {
    #[error("invalid attack parameter: {0}")]
    Parameter(String),
    #[error("release has {got} answers, query has arity {expected}")]
    ReleaseLength { expected: usize, got: usize },
    #[error("enumeration of {candidates:.3e} candidates exceeds the budget of {limit:.3e}")]
    Budget { candidates: f64, limit: f64 },
    #[error("no candidate among {examined} passed the filter")]
    NotFound { examined: u64 },
    #[error(transparent)]
    Lp(#[from] LpError),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
    #[error(transparent)]
    Query(#[from] QueryError),
    #[error(transparent)]
    Mechanism(#[from] MechanismError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "data", rename_all = "snake_case")]
pub enum Reconstruction {
    Real(Vec<f64>),
    Histogram(Vec<u64>),
    Bits(Vec<u8>),
}

impl Reconstruction {
    pub fn as_f64(&self) -> Vec<f64> {
        match self {
            Reconstruction::Real(v) => v.clone(),
            Reconstruction::Histogram(v) => v.iter().map(|&c| c as f64).collect(),
            Reconstruction::Bits(v) => v.iter().map(|&b| f64::from(b)).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttackResult {
    pub reconstruction: Reconstruction,
    /// `‖x̃ − x‖₁` against the truth, when the harness supplies it.
    pub l1_error: Option<f64>,
    /// `l1_error ≤ bound_used`, when the truth is known.
    pub success: Option<bool>,
    pub bound_used: f64,
    /// Fraction of released coordinates the reconstruction explains within
    /// the attack's tolerance.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hit_fraction: Option<f64>,
    /// ℓ1 residual of the LP, for LP-based attacks.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub residual: Option<f64>,
    /// The section-based bound on the real-valued LP error, when it differs
    /// from `bound_used`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub section_bound: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub candidates_examined: Option<u64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub elapsed_ms: Option<f64>,
}

impl AttackResult {
    fn new(reconstruction: Reconstruction, bound_used: f64, started: Instant) -> Self {
        Self {
            reconstruction,
            l1_error: None,
            success: None,
            bound_used,
            hit_fraction: None,
            residual: None,
            section_bound: None,
            candidates_examined: None,
            warnings: Vec::new(),
            elapsed_ms: Some(started.elapsed().as_secs_f64() * 1e3),
        }
    }

    /// Fills `l1_error` and `success` from the true database.
    pub fn score(mut self, truth: &[f64]) -> Self {
        let err = linalg::l1(&linalg::sub(&self.reconstruction.as_f64(), truth));
        self.l1_error = Some(err);
        self.success = Some(err <= self.bound_used);
        self
    }
}

/// Section constant `δ` and smallest singular value `σ` of the query
/// matrix, with the wild fraction `γ = δ²/8` they tolerate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SectionParams {
    pub delta_section: f64,
    pub sigma_min: f64,
    pub gamma_wild: f64,
}

impl SectionParams {
    pub fn new(delta_section: f64, sigma_min: f64) -> Result<Self, AttackError> {
        if !(delta_section > 0.0 && delta_section <= 1.0) {
            return Err(AttackError::Parameter(format!("section constant {delta_section} outside (0, 1]")));
        }
        if !(sigma_min >= 0.0 && sigma_min.is_finite()) {
            return Err(AttackError::Parameter(format!("sigma_min {sigma_min} must be finite and nonnegative")));
        }
        Ok(Self { delta_section, sigma_min, gamma_wild: delta_section * delta_section / 8.0 })
    }

    /// `8α(1−δ²/8)√(kd)/(δσ)`.
    pub fn error_bound(&self, alpha: f64, k: usize, d: usize) -> f64 {
        8.0 * alpha * (1.0 - self.gamma_wild) * ((k * d) as f64).sqrt() / (self.delta_section * self.sigma_min)
    }
}

pub fn lp_decode_attack(query: &CountingQuery, release: &NoisyRelease, params: &SectionParams, alpha: f64) -> Result<AttackResult, AttackError> {
    lp_decode_attack_with(query, release, params, alpha, &LpOptions::default())
}

pub fn lp_decode_attack_with(
    query: &CountingQuery,
    release: &NoisyRelease,
    params: &SectionParams,
    alpha: f64,
    opts: &LpOptions,
) -> Result<AttackResult, AttackError> {
    let started = Instant::now();
    let a = query.matrix();
    if release.len() != a.rows() {
        return Err(AttackError::ReleaseLength { expected: a.rows(), got: release.len() });
    }
    if !(params.sigma_min > 0.0) {
        return Err(AttackError::Parameter("sigma_min must be positive".into()));
    }
    let sol = minimize_l1_residual_with(a, &release.answers, opts)?;
    let bound = params.error_bound(alpha, a.rows(), a.cols());
    let fitted = a.mul_vec(&sol.x);
    let hits = fitted.iter().zip(&release.answers).filter(|(f, y)| (*f - *y).abs() <= alpha + 1e-9).count();
    let mut res = AttackResult::new(Reconstruction::Real(sol.x), bound, started);
    res.residual = Some(sol.residual);
    res.hit_fraction = Some(hits as f64 / a.rows() as f64);
    Ok(res)
}

/// Per-instance check of the LP decoding argument: for `z = x̃ − x` and the
/// wild set `S`, `‖Az‖₁ − 2‖Az‖_{S,1} ≤ 2α(1−δ²/8)k`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProofChainCheck {
    pub lhs: f64,
    pub rhs: f64,
    /// The sharper instance bound `2‖e_{S^c}‖₁` from the realised noise `e`.
    pub noise_bound: f64,
    pub holds: bool,
}

pub fn proof_chain_check(a: &Matrix, z: &[f64], noise: &[f64], wild: &[usize], alpha: f64, delta_section: f64) -> ProofChainCheck {
    let az = a.mul_vec(z);
    let k = a.rows();
    let full = linalg::l1(&az);
    let on_s = linalg::norm(&az, &ProjectedNorm::on(wild.to_vec(), NormOrder::L1));
    let lhs = full - 2.0 * on_s;
    let rhs = 2.0 * alpha * (1.0 - delta_section * delta_section / 8.0) * k as f64;
    let mut is_wild = vec![false; k];
    for &i in wild {
        is_wild[i] = true;
    }
    let noise_bound = 2.0 * noise.iter().enumerate().filter(|(i, _)| !is_wild[*i]).map(|(_, e)| e.abs()).sum::<f64>();
    let slack = 1e-7 * (1.0 + full);
    ProofChainCheck { lhs, rhs, noise_bound, holds: lhs <= rhs + slack }
}

/// Which candidates the exhaustive attacks accept.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "rule", rename_all = "snake_case")]
pub enum CandidateFilter {
    /// Within `tol` on at least a `fraction` of coordinates.
    Majority { tol: f64, fraction: f64 },
    /// Within `theta` on every coordinate.
    AllCoordinates { theta: f64 },
}

impl CandidateFilter {
    fn hits(tol: f64, image: &[f64], y: &[f64]) -> usize {
        image.iter().zip(y).filter(|(a, b)| (*a - *b).abs() <= tol).count()
    }

    pub fn accepts(&self, image: &[f64], y: &[f64]) -> bool {
        match *self {
            CandidateFilter::Majority { tol, fraction } => Self::hits(tol, image, y) as f64 >= fraction * y.len() as f64,
            CandidateFilter::AllCoordinates { theta } => Self::hits(theta, image, y) == y.len(),
        }
    }

    fn tolerance(&self) -> f64 {
        match *self {
            CandidateFilter::Majority { tol, .. } => tol,
            CandidateFilter::AllCoordinates { theta } => theta,
        }
    }
}

/// Refuse enumerations above this many candidates.
pub const ENUMERATION_LIMIT: f64 = 1e7;

/// `C(n+d, d)`: histograms in `(Z⁺)^d` of size at most `n`.
pub fn candidate_count(d: usize, n: u64) -> f64 {
    let mut c = 1.0;
    for i in 1..=d {
        c *= (n as f64 + i as f64) / i as f64;
    }
    c.round()
}

/// Visits every histogram of size at most `n`: by total size, then
/// lexicographically. Stops when `visit` returns `false`.
pub fn enumerate_histograms(d: usize, n: u64, mut visit: impl FnMut(&[u64]) -> bool) {
    fn fill(pos: usize, left: u64, cur: &mut Vec<u64>, visit: &mut dyn FnMut(&[u64]) -> bool) -> bool {
        let d = cur.len();
        if pos + 1 == d {
            cur[pos] = left;
            return visit(cur);
        }
        for v in 0..=left {
            cur[pos] = v;
            if !fill(pos + 1, left - v, cur, visit) {
                return false;
            }
        }
        true
    }
    if d == 0 {
        visit(&[]);
        return;
    }
    let mut cur = vec![0; d];
    for total in 0..=n {
        if !fill(0, total, &mut cur, &mut visit) {
            return;
        }
    }
}

/// Every candidate of size at most `n` accepted by `filter`, in enumeration
/// order.
pub fn passing_candidates(query: &dyn Query, release: &NoisyRelease, n: u64, filter: CandidateFilter) -> Result<Vec<HistogramDatabase>, AttackError> {
    guard(query, release, n)?;
    let mut out = Vec::new();
    enumerate_histograms(query.dim(), n, |c| {
        let x = HistogramDatabase::new(c.to_vec());
        if filter.accepts(&query.evaluate(&x), &release.answers) {
            out.push(x);
        }
        true
    });
    Ok(out)
}

fn guard(query: &dyn Query, release: &NoisyRelease, n: u64) -> Result<(), AttackError> {
    if release.len() != query.arity() {
        return Err(AttackError::ReleaseLength { expected: query.arity(), got: release.len() });
    }
    let candidates = candidate_count(query.dim(), n);
    if candidates > ENUMERATION_LIMIT {
        return Err(AttackError::Budget { candidates, limit: ENUMERATION_LIMIT });
    }
    Ok(())
}

/// First candidate (in enumeration order) accepted by `filter`. The error
/// budget `bound_used` is `n/10`.
pub fn exhaustive_attack(query: &dyn Query, release: &NoisyRelease, n: u64, filter: CandidateFilter) -> Result<AttackResult, AttackError> {
    let started = Instant::now();
    guard(query, release, n)?;
    let mut found = None;
    let mut examined = 0u64;
    enumerate_histograms(query.dim(), n, |c| {
        examined += 1;
        let x = HistogramDatabase::new(c.to_vec());
        let image = query.evaluate(&x);
        if filter.accepts(&image, &release.answers) {
            found = Some((x, image));
            false
        } else {
            true
        }
    });
    let (x, image) = found.ok_or(AttackError::NotFound { examined })?;
    let hits = CandidateFilter::hits(filter.tolerance(), &image, &release.answers);
    let mut res = AttackResult::new(Reconstruction::Histogram(x.counts), n as f64 / 10.0, started);
    res.hit_fraction = Some(if release.is_empty() { 1.0 } else { hits as f64 / release.len() as f64 });
    res.candidates_examined = Some(examined);
    if filter.tolerance().is_infinite() {
        res.warnings.push("infinite tolerance accepts the first enumerated candidate".into());
    }
    Ok(res)
}

/// Majority filter: within `tol` on at least `1/2 + η/4` of the coordinates.
pub fn exhaustive_attack_majority(query: &dyn Query, release: &NoisyRelease, n: u64, tol: f64, eta: f64) -> Result<AttackResult, AttackError> {
    exhaustive_attack(query, release, n, CandidateFilter::Majority { tol, fraction: 0.5 + eta / 4.0 })
}

pub fn exhaustive_attack_allcoords(query: &dyn Query, release: &NoisyRelease, n: u64, theta: f64) -> Result<AttackResult, AttackError> {
    exhaustive_attack(query, release, n, CandidateFilter::AllCoordinates { theta })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AttributeAttackOptions {
    /// LP outputs strictly above this round to 1.
    pub threshold: f64,
    /// `bound_used` as a fraction of `n`.
    pub error_fraction: f64,
    /// Noise bound of the non-wild marginals, for the reported LP bound.
    pub alpha: f64,
}

impl Default for AttributeAttackOptions {
    fn default() -> Self {
        Self { threshold: 0.5, error_fraction: 0.1, alpha: 0.0 }
    }
}

/// The linear system behind the attribute attack: one row per marginal that
/// fixes the hidden attribute to `+1`, built as the Hadamard product of
/// `ℓ−1` indicator matrices over disjoint blocks of known attributes.
#[derive(Debug, Clone)]
pub struct AttributeSystem {
    pub matrix: Matrix,
    /// Index into the full marginal release for each row.
    pub release_rows: Vec<usize>,
}

pub fn attribute_system(known: &KnownAttributes, ell: usize) -> Result<AttributeSystem, AttackError> {
    if ell < 2 {
        return Err(AttackError::Parameter(format!("ell {ell} must be at least 2")));
    }
    let blocks_needed = ell - 1;
    let attrs = &known.columns;
    if attrs.len() < blocks_needed {
        return Err(AttackError::Parameter(format!("{} known attributes cannot fill {blocks_needed} blocks", attrs.len())));
    }
    let q = MarginalQuery::new(known.d_prime, ell)?;
    // Contiguous blocks of near-equal size.
    let mut blocks: Vec<&[(usize, Vec<i8>)]> = Vec::new();
    let base = attrs.len() / blocks_needed;
    let extra = attrs.len() % blocks_needed;
    let mut start = 0;
    for b in 0..blocks_needed {
        let len = base + usize::from(b < extra);
        blocks.push(&attrs[start..start + len]);
        start += len;
    }
    let n = known.n;
    let factors: Vec<Matrix> = blocks
        .iter()
        .map(|block| {
            Matrix::from_fn(2 * block.len(), n, |r, c| {
                let (_, col) = &block[r / 2];
                let sign = if r % 2 == 0 { -1 } else { 1 };
                f64::from(u8::from(col[c] == sign))
            })
        })
        .collect();
    let matrix = hadamard_row_product(&factors)?;
    // Row tuple (i_1, …, i_{ℓ−1}) is lexicographic with the last factor
    // fastest; map each to its conjunction in release order.
    let index_of: std::collections::HashMap<(Vec<usize>, Vec<i8>), usize> = q
        .conjunctions()
        .iter()
        .enumerate()
        .map(|(i, c)| ((c.attributes.clone(), c.signs.clone()), i))
        .collect();
    let dims: Vec<usize> = factors.iter().map(Matrix::rows).collect();
    let mut release_rows = Vec::with_capacity(matrix.rows());
    for mut r in 0..matrix.rows() {
        let mut tuple = vec![0; dims.len()];
        for f in (0..dims.len()).rev() {
            tuple[f] = r % dims[f];
            r /= dims[f];
        }
        let mut fixed: Vec<(usize, i8)> = tuple
            .iter()
            .enumerate()
            .map(|(f, &t)| (blocks[f][t / 2].0, if t % 2 == 0 { -1 } else { 1 }))
            .collect();
        fixed.push((known.hidden_column, 1));
        fixed.sort_unstable();
        let key = (fixed.iter().map(|p| p.0).collect(), fixed.iter().map(|p| p.1).collect());
        release_rows.push(index_of[&key]);
    }
    Ok(AttributeSystem { matrix, release_rows })
}

/// Recovers the hidden column (as bits, `1` for `+1`) from a noisy release
/// of all ℓ-way marginals of the full table.
pub fn attribute_attack(
    known: &KnownAttributes,
    release: &NoisyRelease,
    ell: usize,
    params: &SectionParams,
    opts: &AttributeAttackOptions,
) -> Result<AttackResult, AttackError> {
    let started = Instant::now();
    let expected = MarginalQuery::new(known.d_prime, ell)?.arity();
    if release.len() != expected {
        return Err(AttackError::ReleaseLength { expected, got: release.len() });
    }
    let sys = attribute_system(known, ell)?;
    let y: Vec<f64> = sys.release_rows.iter().map(|&i| release.answers[i]).collect();
    let sol = minimize_l1_residual_with(&sys.matrix, &y, &LpOptions::default())?;
    let bits: Vec<u8> = sol.x.iter().map(|&v| u8::from(v > opts.threshold)).collect();
    let n = known.n;
    let mut res = AttackResult::new(Reconstruction::Bits(bits), opts.error_fraction * n as f64, started);
    res.residual = Some(sol.residual);
    let fitted = sys.matrix.mul_vec(&sol.x);
    let hits = fitted.iter().zip(&y).filter(|(f, v)| (*f - *v).abs() <= opts.alpha + 1e-9).count();
    res.hit_fraction = Some(hits as f64 / y.len().max(1) as f64);
    let spread = (known.d_prime as f64).powi(ell as i32 - 1);
    if spread < n as f64 {
        res.warnings.push(format!("d'^(ell-1) = {spread} < n = {n}: system is under-determined"));
    }
    if params.sigma_min > 0.0 {
        res.section_bound = Some(params.error_bound(opts.alpha, sys.matrix.rows(), n));
    }
    Ok(res)
}

/// Index of the image closest to `y` in ℓ2; ties go to the lowest index.
pub fn nearest_neighbor_decode(images: &[Vec<f64>], y: &[f64]) -> usize {
    assert!(!images.is_empty(), "nearest_neighbor_decode: no images");
    let mut best = (0, f64::INFINITY);
    for (i, img) in images.iter().enumerate() {
        let d2: f64 = img.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum();
        if d2 < best.1 {
            best = (i, d2);
        }
    }
    best.0
}

/// Knobs of the (ε,δ) witness.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WitnessParams {
    /// Gate: at least `1/2 + γ` of the answers within `η√n` of the truth.
    pub gamma: f64,
    pub eta: f64,
    /// Success: at least `(1−√δ)n` bits recovered; fires at rate `≥ 3√δ`.
    pub delta: f64,
    /// Rounding threshold for LP outputs.
    pub threshold: f64,
}

impl Default for WitnessParams {
    fn default() -> Self {
        Self { gamma: 0.05, eta: 0.5, delta: 0.01, threshold: 0.5 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WitnessTrial {
    pub trial: usize,
    pub gate_fraction: f64,
    pub gate_passed: bool,
    pub bits_recovered: usize,
    pub recovered: bool,
    pub violation: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WitnessReport {
    pub n: usize,
    pub k: usize,
    pub params: WitnessParams,
    pub seed: u64,
    pub gate_tolerance: f64,
    pub required_bits: f64,
    pub gate_rate: f64,
    pub rate: f64,
    pub fire_threshold: f64,
    pub fires: bool,
    pub trials: Vec<WitnessTrial>,
}

/// Release source for the witness: true answers and a per-trial seed in, a
/// release out.
pub type ReleaseSource<'a> = dyn Fn(&[f64], u64) -> Result<NoisyRelease, MechanismError> + Sync + 'a;

/// Runs LP decoding against `trials` uniform `x ∈ {0,1}^n` and reports how
/// often the gate passes and the attack recovers all but a `√δ` fraction of
/// the bits.
pub fn epsilon_delta_witness(
    mechanism: &ReleaseSource<'_>,
    query: &CountingQuery,
    params: &WitnessParams,
    trials: usize,
    seed: u64,
) -> Result<WitnessReport, AttackError> {
    let n = query.dim();
    let k = query.arity();
    if !(params.delta > 0.0 && params.delta < 1.0) {
        return Err(AttackError::Parameter(format!("delta {} outside (0, 1)", params.delta)));
    }
    let gate_tolerance = params.eta * (n as f64).sqrt();
    let required_bits = (1.0 - params.delta.sqrt()) * n as f64;
    let records: Result<Vec<WitnessTrial>, AttackError> = (0..trials)
        .into_par_iter()
        .map(|t| {
            let mut r = rng::derived(seed, 2 * t as u64);
            let x = BitDatabase::random(n, &mut r);
            let truth = query.apply(&x.as_f64());
            let rel = mechanism(&truth, rng::derive_seed(seed, 2 * t as u64 + 1))?;
            if rel.len() != k {
                return Err(AttackError::ReleaseLength { expected: k, got: rel.len() });
            }
            let close = rel.answers.iter().zip(&truth).filter(|(a, b)| (*a - *b).abs() <= gate_tolerance).count();
            let gate_fraction = close as f64 / k as f64;
            let gate_passed = gate_fraction >= 0.5 + params.gamma;
            let sol = minimize_l1_residual_with(query.matrix(), &rel.answers, &LpOptions::default())?;
            let bits_recovered = sol
                .x
                .iter()
                .zip(&x.bits)
                .filter(|(&v, &b)| u8::from(v > params.threshold) == b)
                .count();
            let recovered = bits_recovered as f64 >= required_bits;
            Ok(WitnessTrial { trial: t, gate_fraction, gate_passed, bits_recovered, recovered, violation: gate_passed && recovered })
        })
        .collect();
    let trials_out = records?;
    let count = trials_out.len().max(1) as f64;
    let gate_rate = trials_out.iter().filter(|t| t.gate_passed).count() as f64 / count;
    let rate = trials_out.iter().filter(|t| t.violation).count() as f64 / count;
    let fire_threshold = 3.0 * params.delta.sqrt();
    Ok(WitnessReport {
        n,
        k,
        params: *params,
        seed,
        gate_tolerance,
        required_bits,
        gate_rate,
        rate,
        fire_threshold,
        fires: rate >= fire_threshold,
        trials: trials_out,
    })
}


#[cfg(test)]
mod props {
    use super::*;
    use crate::mechanisms::noiseless;
    use crate::queries::random_sign_query;
    use proptest::prelude::*;

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(1000))]

        #[test]
        fn nearest_neighbor_matches_scan_and_offset(
            images in proptest::collection::vec(proptest::collection::vec(-5i32..5, 3), 1..8),
            y in proptest::collection::vec(-5i32..5, 3),
            offset in proptest::collection::vec(-50i32..50, 3),
        ) {
            let f = |v: &Vec<i32>| v.iter().map(|&a| f64::from(a)).collect::<Vec<f64>>();
            let imgs: Vec<Vec<f64>> = images.iter().map(f).collect();
            let yf = f(&y);
            let d2 = |a: &[f64]| a.iter().zip(&yf).map(|(p, q)| (p - q).powi(2)).sum::<f64>();
            let best = imgs.iter().map(|i| d2(i)).fold(f64::INFINITY, f64::min);
            let want = imgs.iter().position(|i| d2(i) == best).unwrap();
            prop_assert_eq!(nearest_neighbor_decode(&imgs, &yf), want);
            let shift = |v: &[f64]| v.iter().zip(&offset).map(|(a, o)| a + f64::from(*o)).collect::<Vec<f64>>();
            let shifted: Vec<Vec<f64>> = imgs.iter().map(|i| shift(i)).collect();
            prop_assert_eq!(nearest_neighbor_decode(&shifted, &shift(&yf)), want);
        }

        #[test]
        fn self_consistent_release_always_matches(counts in proptest::collection::vec(0u64..3, 3), seed in any::<u64>()) {
            let q = random_sign_query(3, 12, seed);
            let x = HistogramDatabase::new(counts);
            let rel = noiseless(&q.evaluate(&x));
            let found = exhaustive_attack_majority(&q, &rel, 6, 0.0, 0.25);
            prop_assert!(found.is_ok());
            let found = exhaustive_attack_allcoords(&q, &rel, 6, 0.0);
            prop_assert!(found.is_ok());
            let passing = passing_candidates(&q, &rel, 6, CandidateFilter::AllCoordinates { theta: 0.0 }).unwrap();
            prop_assert!(passing.contains(&x));
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(1000))]

        #[test]
        fn noiseless_full_rank_is_exact(counts in proptest::collection::vec(0u64..5, 6), seed in any::<u64>()) {
            let q = random_sign_query(6, 24, seed);
            prop_assume!(crate::linalg::smallest_singular_value(q.matrix()).unwrap() > 1e-6);
            let x = HistogramDatabase::new(counts).as_f64();
            let p = SectionParams::new(0.5, 1.0).unwrap();
            let res = lp_decode_attack(&q, &noiseless(&q.apply(&x)), &p, 0.0).unwrap().score(&x);
            prop_assert!(res.l1_error.unwrap() <= 1e-6);
        }
    }
}
