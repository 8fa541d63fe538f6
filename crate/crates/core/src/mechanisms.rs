//! Noise-adding release mechanisms.
//!
//! Privacy parameters use the base-2 definition (`2^ε` ratio bounds); the
//! Laplace scale carries the `1/ln 2` conversion.

use rand::seq::index;
use rand::Rng;
use rand_distr::{Distribution, Exp1, StandardNormal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::rng;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MechanismError {
    #[error("invalid mechanism parameter: {0}")]
    Parameter(String),
    #[error("true answers contain a non-finite value at {0}")]
    NonFinite(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PrivacyParams {
    pub epsilon: f64,
    pub delta: f64,
}

impl PrivacyParams {
    pub fn new(epsilon: f64, delta: f64) -> Result<Self, MechanismError> {
        if !(epsilon > 0.0) {
            return Err(MechanismError::Parameter(format!("epsilon {epsilon} must be positive")));
        }
        if !(0.0..1.0).contains(&delta) {
            return Err(MechanismError::Parameter(format!("delta {delta} outside [0, 1)")));
        }
        Ok(Self { epsilon, delta })
    }
}

/// Base of the logarithm in the Gaussian variance `k·log(1/δ)/ε²`.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LogBase {
    #[default]
    Natural,
    Two,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MechanismId {
    Noiseless,
    Laplace,
    Gaussian,
    BoundedNoise,
}

/// Declared shape of bounded-noise corruption.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoiseProfile {
    pub alpha: f64,
    pub gamma: f64,
    pub wild_magnitude: f64,
    /// Indices that received wild noise, sorted.
    pub wild: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoisyRelease {
    pub answers: Vec<f64>,
    pub mechanism: MechanismId,
    pub seed: u64,
    /// Per-coordinate noise scale: Laplace `b`, Gaussian `σ`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scale: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub profile: Option<NoiseProfile>,
}

impl NoisyRelease {
    pub fn len(&self) -> usize {
        self.answers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.answers.is_empty()
    }
}

fn check_answers(answers: &[f64]) -> Result<(), MechanismError> {
    match answers.iter().position(|v| !v.is_finite()) {
        Some(i) => Err(MechanismError::NonFinite(i)),
        None => Ok(()),
    }
}

pub fn noiseless(answers: &[f64]) -> NoisyRelease {
    NoisyRelease { answers: answers.to_vec(), mechanism: MechanismId::Noiseless, seed: 0, scale: None, profile: None }
}

/// Laplace scale `b = Δ₁/(ε·ln 2)` for the base-2 definition.
pub fn laplace_scale(l1_sensitivity: f64, epsilon: f64) -> f64 {
    l1_sensitivity / (epsilon * std::f64::consts::LN_2)
}

pub fn laplace_mechanism(answers: &[f64], l1_sensitivity: f64, epsilon: f64, seed: u64) -> Result<NoisyRelease, MechanismError> {
    if !(epsilon > 0.0) {
        return Err(MechanismError::Parameter(format!("epsilon {epsilon} must be positive")));
    }
    if !(l1_sensitivity > 0.0 && l1_sensitivity.is_finite()) {
        return Err(MechanismError::Parameter(format!("sensitivity {l1_sensitivity} must be positive")));
    }
    check_answers(answers)?;
    let b = laplace_scale(l1_sensitivity, epsilon);
    let mut r = rng::seeded(seed);
    let out = answers
        .iter()
        .map(|&a| {
            let e1: f64 = Exp1.sample(&mut r);
            let e2: f64 = Exp1.sample(&mut r);
            a + b * (e1 - e2)
        })
        .collect();
    Ok(NoisyRelease { answers: out, mechanism: MechanismId::Laplace, seed, scale: Some(b), profile: None })
}

/// `σ² = k·log(1/δ)/ε²` under the chosen logarithm base.
pub fn gaussian_variance(k: usize, params: &PrivacyParams, base: LogBase) -> f64 {
    let log = match base {
        LogBase::Natural => (1.0 / params.delta).ln(),
        LogBase::Two => (1.0 / params.delta).log2(),
    };
    k as f64 * log / (params.epsilon * params.epsilon)
}

pub fn gaussian_mechanism(answers: &[f64], k: usize, params: &PrivacyParams, base: LogBase, seed: u64) -> Result<NoisyRelease, MechanismError> {
    if !(params.delta > 0.0 && params.delta < 1.0) {
        return Err(MechanismError::Parameter(format!("delta {} outside (0, 1)", params.delta)));
    }
    if !(params.epsilon > 0.0) {
        return Err(MechanismError::Parameter(format!("epsilon {} must be positive", params.epsilon)));
    }
    gaussian_noise_release(answers, gaussian_variance(k, params, base).sqrt(), seed)
}

/// I.i.d. `N(0, σ²)` noise at an explicit `σ`.
pub fn gaussian_noise_release(answers: &[f64], sigma: f64, seed: u64) -> Result<NoisyRelease, MechanismError> {
    if !(sigma >= 0.0 && sigma.is_finite()) {
        return Err(MechanismError::Parameter(format!("sigma {sigma} must be finite and nonnegative")));
    }
    check_answers(answers)?;
    let mut r = rng::seeded(seed);
    let out = answers
        .iter()
        .map(|&a| {
            let z: f64 = StandardNormal.sample(&mut r);
            a + sigma * z
        })
        .collect();
    Ok(NoisyRelease { answers: out, mechanism: MechanismId::Gaussian, seed, scale: Some(sigma), profile: None })
}

/// How wild coordinates are corrupted.
#[derive(Debug, Clone, Default, PartialEq)]
pub enum WildPattern {
    /// Independent uniform sign per coordinate.
    #[default]
    Symmetric,
    /// Sign of the given vector per coordinate (zero counts as `+`), e.g. to
    /// pull the decoder towards a decoy.
    Aligned(Vec<f64>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct BoundedNoise {
    pub alpha: f64,
    pub gamma: f64,
    pub wild_magnitude: f64,
    pub pattern: WildPattern,
}

pub fn bounded_noise_adversary(answers: &[f64], alpha: f64, gamma: f64, wild_magnitude: f64, seed: u64) -> Result<NoisyRelease, MechanismError> {
    let spec = BoundedNoise { alpha, gamma, wild_magnitude, pattern: WildPattern::Symmetric };
    bounded_noise_adversary_with(answers, &spec, seed)
}

/// Perturbs `⌊γk⌋` coordinates, chosen uniformly without replacement, by
/// `±wild_magnitude`, and the rest by i.i.d. uniform noise in `[−α, α]`.
pub fn bounded_noise_adversary_with(answers: &[f64], spec: &BoundedNoise, seed: u64) -> Result<NoisyRelease, MechanismError> {
    let BoundedNoise { alpha, gamma, wild_magnitude, .. } = *spec;
    if !(0.0..1.0).contains(&gamma) {
        return Err(MechanismError::Parameter(format!("gamma {gamma} outside [0, 1)")));
    }
    if !(alpha >= 0.0 && alpha.is_finite()) {
        return Err(MechanismError::Parameter(format!("alpha {alpha} must be finite and nonnegative")));
    }
    if !(wild_magnitude >= alpha && wild_magnitude.is_finite()) {
        return Err(MechanismError::Parameter(format!("wild magnitude {wild_magnitude} below alpha {alpha}")));
    }
    check_answers(answers)?;
    let k = answers.len();
    if let WildPattern::Aligned(dir) = &spec.pattern {
        if dir.len() != k {
            return Err(MechanismError::Parameter(format!("aligned direction has length {}, expected {k}", dir.len())));
        }
    }
    let mut r = rng::seeded(seed);
    let wild_count = (gamma * k as f64).floor() as usize;
    let mut wild = index::sample(&mut r, k, wild_count).into_vec();
    wild.sort_unstable();
    let mut is_wild = vec![false; k];
    for &i in &wild {
        is_wild[i] = true;
    }
    let out = answers
        .iter()
        .enumerate()
        .map(|(i, &a)| {
            if is_wild[i] {
                let sign = match &spec.pattern {
                    WildPattern::Symmetric => {
                        if r.random_bool(0.5) {
                            1.0
                        } else {
                            -1.0
                        }
                    }
                    WildPattern::Aligned(dir) => {
                        if dir[i] < 0.0 {
                            -1.0
                        } else {
                            1.0
                        }
                    }
                };
                a + sign * wild_magnitude
            } else if alpha > 0.0 {
                a + r.random_range(-alpha..=alpha)
            } else {
                a
            }
        })
        .collect();
    Ok(NoisyRelease {
        answers: out,
        mechanism: MechanismId::BoundedNoise,
        seed,
        scale: None,
        profile: Some(NoiseProfile { alpha, gamma, wild_magnitude, wild }),
    })
}
