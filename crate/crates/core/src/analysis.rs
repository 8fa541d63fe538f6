//! Monte Carlo validators for the concentration facts behind the attacks.

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::attacks::nearest_neighbor_decode;
use crate::data::{greedy_binary_code, DatabaseFamily, FamilyOptions, HistogramDatabase};
use crate::linalg::{self, hadamard_row_product, smallest_singular_value, Matrix};
use crate::mechanisms::{gaussian_mechanism, laplace_mechanism, LogBase, PrivacyParams};
use crate::queries::{LipschitzQuery, Query};
use crate::{rng, Error, Result};

/// Trials per RNG stream; fixed so results do not depend on thread count.
const CHUNK: usize = 1024;

/// Counts trials for which `event` fires, one derived stream per chunk.
pub fn count_events(trials: usize, seed: u64, event: impl Fn(&mut rng::Rng) -> bool + Sync) -> u64 {
    let chunks = trials.div_ceil(CHUNK);
    (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut r = rng::derived(seed, c as u64);
            let len = CHUNK.min(trials - c * CHUNK);
            (0..len).filter(|_| event(&mut r)).count() as u64
        })
        .sum()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundDirection {
    /// The probability must be at least the bound.
    Lower,
    /// The probability must be at most the bound.
    Upper,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TailTestReport {
    pub empirical_prob: f64,
    pub theoretical_bound: f64,
    pub trials: usize,
    pub events: u64,
    pub direction: BoundDirection,
    /// Three binomial standard deviations at the bound.
    pub tolerance: f64,
    pub pass: bool,
    pub seed: u64,
}

impl TailTestReport {
    pub fn new(events: u64, trials: usize, bound: f64, direction: BoundDirection, seed: u64) -> Self {
        let empirical = events as f64 / trials.max(1) as f64;
        let tolerance = binomial_tolerance(bound, trials);
        let pass = match direction {
            BoundDirection::Lower => empirical >= bound - tolerance,
            BoundDirection::Upper => empirical <= bound + tolerance,
        };
        Self { empirical_prob: empirical, theoretical_bound: bound, trials, events, direction, tolerance, pass, seed }
    }

    /// The same measurement judged against a different bound.
    pub fn against(&self, bound: f64, direction: BoundDirection) -> Self {
        Self::new(self.events, self.trials, bound, direction, self.seed)
    }
}

/// `3·√(p(1−p)/trials)` with `p` clamped to `[0, 1]`.
pub fn binomial_tolerance(p: f64, trials: usize) -> f64 {
    let p = p.clamp(0.0, 1.0);
    3.0 * (p * (1.0 - p) / trials.max(1) as f64).sqrt()
}

/// `Pr[|Σ a_i x_i| > θ]` over uniform `x ∈ {−1,1}^d`, judged against the
/// lower bound `exp(−2dθ²/n²)` with `n = Σ a_i`.
pub fn rademacher_deviation_test(a: &[f64], theta: f64, trials: usize, seed: u64) -> Result<TailTestReport> {
    if a.is_empty() || a.iter().any(|&w| !(w >= 0.0 && w.is_finite())) {
        return Err(Error::Parameter("weights must be nonnegative and finite".into()));
    }
    let n: f64 = a.iter().sum();
    if !(theta >= 0.0 && theta <= n / 2.0) {
        return Err(Error::Parameter(format!("theta {theta} outside [0, n/2] for n = {n}")));
    }
    let d = a.len() as f64;
    let bound = (-2.0 * d * theta * theta / (n * n)).exp();
    let events = count_events(trials, seed, |r| {
        let s: f64 = a.iter().map(|&w| if r.random_bool(0.5) { w } else { -w }).sum();
        s.abs() > theta
    });
    Ok(TailTestReport::new(events, trials, bound, BoundDirection::Lower, seed))
}

/// `Pr[Σ Y_i² > 2(1+ξ)kσ²]` for i.i.d. `Y_i ~ N(0, σ²)`, judged against
/// the upper bound `2^{−ξk/2}`.
pub fn chi_square_tail_test(k: usize, sigma: f64, xi: f64, trials: usize, seed: u64) -> Result<TailTestReport> {
    if k == 0 || !(sigma > 0.0) || !(xi > 0.0) {
        return Err(Error::Parameter(format!("need k >= 1, sigma > 0, xi > 0; got k={k}, sigma={sigma}, xi={xi}")));
    }
    let threshold = 2.0 * (1.0 + xi) * k as f64 * sigma * sigma;
    let bound = 2f64.powf(-xi * k as f64 / 2.0);
    let events = count_events(trials, seed, |r| {
        let s: f64 = (0..k)
            .map(|_| {
                let z: f64 = StandardNormal.sample(r);
                (sigma * z) * (sigma * z)
            })
            .sum();
        s > threshold
    });
    Ok(TailTestReport::new(events, trials, bound, BoundDirection::Upper, seed))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SectionEstimate {
    /// `min ‖Az‖₁/(√k‖Az‖₂)` over the sampled directions: an upper estimate
    /// of the true section constant, since sampling cannot certify a
    /// minimum.
    pub delta_hat: f64,
    pub samples: usize,
    pub min_witness: Vec<f64>,
    pub seed: u64,
}

/// Samples Gaussian directions `z` and minimizes `‖Az‖₁/(√k‖Az‖₂)`. A
/// direction with `Az = 0` gives `δ̂ = 0`.
pub fn estimate_section_constant(a: &Matrix, samples: usize, seed: u64) -> Result<SectionEstimate> {
    if samples == 0 {
        return Err(Error::Parameter("samples must be at least 1".into()));
    }
    let k = a.rows() as f64;
    let mut r = rng::seeded(seed);
    let mut best = (f64::INFINITY, Vec::new());
    for _ in 0..samples {
        let z: Vec<f64> = (0..a.cols()).map(|_| StandardNormal.sample(&mut r)).collect();
        let az = a.mul_vec(&z);
        let l2 = linalg::l2(&az);
        let ratio = if l2 == 0.0 { 0.0 } else { linalg::l1(&az) / (k.sqrt() * l2) };
        if ratio < best.0 {
            let norm = linalg::l2(&z);
            best = (ratio, z.iter().map(|v| v / norm).collect());
        }
    }
    Ok(SectionEstimate { delta_hat: best.0.min(1.0), samples, min_witness: best.1, seed })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SigmaPoint {
    pub d_prime: usize,
    pub n: usize,
    pub rows: usize,
    /// `σ_min/√(d'^{ℓ−1})` per trial.
    pub ratios: Vec<f64>,
    pub median: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SigmaScalingReport {
    pub ell: usize,
    pub n_ratio: f64,
    pub trials: usize,
    pub seed: u64,
    pub points: Vec<SigmaPoint>,
    /// `1 − min_j median_j / median_0`.
    pub max_relative_drop: f64,
    pub all_positive: bool,
    pub pass: bool,
}

/// For each `d'`, the smallest singular value of Hadamard products of
/// `ℓ−1` i.i.d. `{0,1}` matrices of shape `d' × n` with `n = ⌊n_ratio·d'⌋`,
/// normalised by `√(d'^{ℓ−1})`. Passes when every ratio is positive and the
/// median falls by less than half across the sweep.
pub fn hadamard_sigma_scaling(d_prime_list: &[usize], ell: usize, n_ratio: f64, trials: usize, seed: u64) -> Result<SigmaScalingReport> {
    if ell < 2 {
        return Err(Error::Parameter(format!("ell {ell} leaves no Hadamard factor")));
    }
    if d_prime_list.is_empty() || trials == 0 {
        return Err(Error::Parameter("need at least one d' and one trial".into()));
    }
    let mut points = Vec::new();
    for (pi, &dp) in d_prime_list.iter().enumerate() {
        let n = ((n_ratio * dp as f64).floor() as usize).max(1);
        let rows = dp.pow(ell as u32 - 1);
        if rows < n {
            return Err(Error::Parameter(format!("d'^(ell-1) = {rows} < n = {n}")));
        }
        let ratios: Result<Vec<f64>> = (0..trials)
            .into_par_iter()
            .map(|t| {
                let mut r = rng::derived(seed, (pi * trials + t) as u64);
                let factors: Vec<Matrix> = (0..ell - 1)
                    .map(|_| Matrix::from_fn(dp, n, |_, _| f64::from(u8::from(r.random_bool(0.5)))))
                    .collect();
                let a = hadamard_row_product(&factors)?;
                Ok(smallest_singular_value(&a)? / (rows as f64).sqrt())
            })
            .collect();
        let ratios = ratios?;
        points.push(SigmaPoint { d_prime: dp, n, rows, median: median(&ratios), ratios });
    }
    let first = points[0].median;
    let lowest = points.iter().map(|p| p.median).fold(f64::INFINITY, f64::min);
    let drop = if first > 0.0 { 1.0 - lowest / first } else { 1.0 };
    let all_positive = points.iter().all(|p| p.ratios.iter().all(|&v| v > 0.0));
    Ok(SigmaScalingReport {
        ell,
        n_ratio,
        trials,
        seed,
        max_relative_drop: drop.max(0.0),
        all_positive,
        pass: all_positive && drop < 0.5,
        points,
    })
}

pub fn median(v: &[f64]) -> f64 {
    let mut s = v.to_vec();
    s.sort_by(f64::total_cmp);
    let m = s.len();
    if m == 0 {
        f64::NAN
    } else if m % 2 == 1 {
        s[m / 2]
    } else {
        (s[m / 2 - 1] + s[m / 2]) / 2.0
    }
}

/// Binary entropy in bits.
pub fn binary_entropy(p: f64) -> f64 {
    if p <= 0.0 || p >= 1.0 {
        0.0
    } else {
        -p * p.log2() - (1.0 - p) * (1.0 - p).log2()
    }
}

/// `s − h(1−p) − (1−p)·s`, floored at zero: mutual information lower bound
/// for a decoder that succeeds with probability `p` over `2^s` equally
/// likely messages.
pub fn fano_lower_bound(p: f64, s: f64) -> f64 {
    let e = 1.0 - p;
    (s - binary_entropy(e) - e * s).max(0.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MutualInfoConfig {
    pub n: usize,
    pub eta: f64,
    pub epsilon: f64,
    pub delta: f64,
    pub trials: usize,
    pub seed: u64,
    /// Query arity as a multiple of `n`.
    pub arity_factor: usize,
    pub log_base: LogBase,
    /// Laplace ℓ1 sensitivity; `None` uses the arity `k`.
    pub laplace_sensitivity: Option<f64>,
}

impl MutualInfoConfig {
    pub fn new(n: usize, eta: f64, epsilon: f64, delta: f64, trials: usize, seed: u64) -> Self {
        Self { n, eta, epsilon, delta, trials, seed, arity_factor: 80, log_base: LogBase::Natural, laplace_sensitivity: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecodeOutcome {
    pub noise_scale: f64,
    pub recovery_rate: f64,
    pub fano_bound: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MutualInfoReport {
    pub config: MutualInfoConfig,
    /// `log2` of the code family size actually built.
    pub s: u32,
    pub target_s: u32,
    pub k: usize,
    pub radius: f64,
    pub min_hamming: u64,
    pub gaussian: DecodeOutcome,
    pub laplace: DecodeOutcome,
    /// The `3εn` ceiling on mutual information under ε-DP.
    pub dp_ceiling: f64,
}

/// Binary code family of size `2^{⌊n(1−η)⌋}` with pairwise Hamming distance
/// `max(⌈η²n/8⌉, ⌈2r⌉)` for bump radius `r = n/30`, queried by a Lipschitz
/// query of arity `k = arity_factor·n`. Uniformly drawn members are released
/// through the Gaussian and Laplace mechanisms and decoded by nearest
/// neighbour.
pub fn mutual_information_experiment(cfg: &MutualInfoConfig) -> Result<MutualInfoReport> {
    let n = cfg.n;
    if n == 0 || n > 24 {
        return Err(Error::Parameter(format!("n = {n} outside desk scale 1..=24")));
    }
    if !(cfg.eta > 0.0 && cfg.eta < 1.0) {
        return Err(Error::Parameter(format!("eta {} outside (0, 1)", cfg.eta)));
    }
    let params = PrivacyParams::new(cfg.epsilon, cfg.delta)?;
    let radius = n as f64 / 30.0;
    let min_hamming = ((cfg.eta * cfg.eta * n as f64 / 8.0).ceil() as u32).max((2.0 * radius).ceil() as u32).max(1);
    let target_s = (n as f64 * (1.0 - cfg.eta)).floor() as u32;
    let opts = FamilyOptions { seed: cfg.seed, ..Default::default() };
    let code = greedy_binary_code(n as u32, min_hamming, 1 << target_s, &opts);
    let members: Vec<HistogramDatabase> = code
        .iter()
        .map(|&w| HistogramDatabase::new((0..n).map(|j| ((w >> j) & 1) as u64).collect()))
        .collect();
    let family = DatabaseFamily::from_members(members, n as f64)?;
    let s = family.s;
    let k = cfg.arity_factor * n;
    let query = LipschitzQuery::with_radius(family, radius, k, rng::derive_seed(cfg.seed, 1))?;
    let images: Vec<Vec<f64>> = query.anchors().members.par_iter().map(|x| query.evaluate(x)).collect();
    let m = images.len();

    let run = |mech: &(dyn Fn(&[f64], u64) -> Result<crate::mechanisms::NoisyRelease> + Sync), stream: u64| -> Result<(f64, f64)> {
        let hits: Result<Vec<(bool, f64)>> = (0..cfg.trials)
            .into_par_iter()
            .map(|t| {
                let mut r = rng::derived(rng::derive_seed(cfg.seed, stream), t as u64);
                let i = r.random_range(0..m);
                let rel = mech(&images[i], r.random())?;
                Ok((nearest_neighbor_decode(&images, &rel.answers) == i, rel.scale.unwrap_or(0.0)))
            })
            .collect();
        let hits = hits?;
        let rate = hits.iter().filter(|h| h.0).count() as f64 / cfg.trials.max(1) as f64;
        Ok((rate, hits.first().map_or(0.0, |h| h.1)))
    };

    let gauss = |a: &[f64], sd: u64| Ok(gaussian_mechanism(a, k, &params, cfg.log_base, sd)?);
    let sensitivity = cfg.laplace_sensitivity.unwrap_or(k as f64);
    let lap = |a: &[f64], sd: u64| Ok(laplace_mechanism(a, sensitivity, cfg.epsilon, sd)?);
    let (g_rate, g_scale) = run(&gauss, 2)?;
    let (l_rate, l_scale) = run(&lap, 3)?;
    let sf = f64::from(s);
    Ok(MutualInfoReport {
        config: *cfg,
        s,
        target_s,
        k,
        radius,
        min_hamming: u64::from(min_hamming),
        gaussian: DecodeOutcome { noise_scale: g_scale, recovery_rate: g_rate, fano_bound: fano_lower_bound(g_rate, sf) },
        laplace: DecodeOutcome { noise_scale: l_scale, recovery_rate: l_rate, fano_bound: fano_lower_bound(l_rate, sf) },
        dp_ceiling: 3.0 * cfg.epsilon * n as f64,
    })
}
