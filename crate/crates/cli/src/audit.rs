//! Offline audit of a released answer vector against its query.

use serde::Serialize;

use dpal_core::analysis::estimate_section_constant;
use dpal_core::attacks::{
    attribute_attack, attribute_system, lp_decode_attack, nearest_neighbor_decode, AttackResult, AttributeAttackOptions,
    Reconstruction, SectionParams,
};
use dpal_core::io::{BuiltQuery, Database};
use dpal_core::linalg::{l1, smallest_singular_value};
use dpal_core::mechanisms::NoisyRelease;
use dpal_core::queries::Query;

use crate::CliError;

pub const BLATANT: &str = "blatantly non-private";
pub const NO_RECONSTRUCTION: &str = "no reconstruction at configured thresholds";

/// Noise profile the auditor assumes of the release.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct Profile {
    pub alpha: f64,
    pub gamma: f64,
    pub tolerance: f64,
    pub section_samples: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, Serialize)]
pub struct Audit {
    pub query_kind: &'static str,
    pub verdict: &'static str,
    pub profile: Profile,
    /// Released coordinates explained within `α`.
    pub hit_fraction: f64,
    pub required_fraction: f64,
    pub estimated_size: f64,
    pub result: AttackResult,
}

fn hits(fitted: &[f64], y: &[f64], slack: f64) -> f64 {
    let n = fitted.iter().zip(y).filter(|(f, v)| (*f - *v).abs() <= slack).count();
    n as f64 / y.len().max(1) as f64
}

/// A release is blatantly non-private when some database explains all but a
/// `γ` fraction of it within `α` and the attack's error guarantee is below a
/// tenth of that database's size.
pub fn audit(query: &BuiltQuery, release: &NoisyRelease, known: Option<Database>, profile: Profile) -> Result<Audit, CliError> {
    let q = query.as_query();
    if release.len() != q.arity() {
        return Err(CliError::Input(format!("release has {} answers, query arity is {}", release.len(), q.arity())));
    }
    let slack = profile.alpha + profile.tolerance;
    let required = 1.0 - profile.gamma;
    let (kind, result, hit_fraction, size) = match query {
        BuiltQuery::Counting(c) => {
            let section = estimate_section_constant(c.matrix(), profile.section_samples, profile.seed)?;
            let sigma = smallest_singular_value(c.matrix())?;
            if sigma <= 0.0 {
                return Err(CliError::Input("query matrix is rank deficient; LP decoding has no error guarantee".into()));
            }
            let params = SectionParams::new(section.delta_hat.max(f64::MIN_POSITIVE), sigma)?;
            let res = lp_decode_attack(c, release, &params, profile.alpha)?;
            let x = res.reconstruction.as_f64();
            let h = hits(&c.apply(&x), &release.answers, slack);
            ("counting", res, h, l1(&x))
        }
        BuiltQuery::Lipschitz(lq) => {
            let images: Vec<Vec<f64>> = lq.anchors().members.iter().map(|m| lq.evaluate(m)).collect();
            let i = nearest_neighbor_decode(&images, &release.answers);
            let h = hits(&images[i], &release.answers, slack);
            let anchor = lq.anchors().members[i].clone();
            let size = anchor.size() as f64;
            let res = AttackResult {
                reconstruction: Reconstruction::Histogram(anchor.counts),
                l1_error: None,
                success: None,
                bound_used: 0.0,
                hit_fraction: Some(h),
                residual: None,
                section_bound: None,
                candidates_examined: Some(images.len() as u64),
                warnings: Vec::new(),
                elapsed_ms: None,
            };
            ("lipschitz", res, h, size)
        }
        BuiltQuery::Marginal(m) => {
            let Some(Database::Table(table)) = known else {
                return Err(CliError::Input("a marginal release needs --known with a table whose meta.hidden_column is set".into()));
            };
            if table.d_prime() != m.d_prime() {
                return Err(CliError::Input(format!("table has {} attributes, query expects {}", table.d_prime(), m.d_prime())));
            }
            let known = table.known_part()?;
            let params = SectionParams::new(1.0, 0.0)?;
            let opts = AttributeAttackOptions { alpha: slack, ..Default::default() };
            let res = attribute_attack(&known, release, m.ell(), &params, &opts)?;
            let sys = attribute_system(&known, m.ell())?;
            let Reconstruction::Bits(bits) = &res.reconstruction else { unreachable!("attribute attack returns bits") };
            let b: Vec<f64> = bits.iter().map(|&v| f64::from(v)).collect();
            let y: Vec<f64> = sys.release_rows.iter().map(|&i| release.answers[i]).collect();
            let h = hits(&sys.matrix.mul_vec(&b), &y, slack);
            ("marginal", res, h, known.n as f64)
        }
    };
    let guarantee = match query {
        BuiltQuery::Counting(_) => result.bound_used <= (size / 10.0).max(profile.tolerance),
        _ => true,
    };
    let verdict = if hit_fraction >= required && guarantee { BLATANT } else { NO_RECONSTRUCTION };
    Ok(Audit { query_kind: kind, verdict, profile, hit_fraction, required_fraction: required, estimated_size: size, result })
}
