//! Factuality estimated from a model's own Self-Known (SK) and Self-Unknown
//! (SU) scores.
//!
//! If a model judges a fraction SK of its correct claims correct and a
//! fraction 1 - SU of its wrong claims correct, and the share of claims it
//! judges correct equals its factuality σ, then
//!
//! ```text
//! σ = SK·σ + (1 - SU)·(1 - σ)   =>   σ = (1 - SU) / (2 - SU - SK)
//! ```
//!
//! [`fixed_point_oracle`] iterates the left-hand relation directly and serves
//! as an independent check on the closed form. [`simulate_claim_stream`]
//! draws a synthetic claim stream that satisfies the assumptions by
//! construction.
//!
//! The simulator's randomness is SplitMix64 in counter mode: draw `k` for
//! seed `s` is `mix(s + (k + 1) * 0x9E3779B97F4A7C15)` with the standard
//! SplitMix64 finalizer, mapped to `[0, 1)` as `(x >> 11) * 2^-53`. Claim
//! `i` uses draw `2i` for its label and `2i + 1` for its judgment, so any
//! implementation of this scheme reproduces the same stream.

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Estimation is refused when `SK + SU >= 2 - DEGENERACY_EPS`.
pub const DEGENERACY_EPS: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EstimatorError {
    #[error("{name} = {value} outside [0, 1]")]
    OutOfRange { name: &'static str, value: f64 },
    #[error("degenerate denominator: self_known {self_known} + self_unknown {self_unknown} >= 2")]
    Degenerate { self_known: f64, self_unknown: f64 },
    #[error("fixed-point iteration did not converge in {iterations} steps")]
    NonConvergence { iterations: usize },
    #[error("invalid simulation config: {0}")]
    InvalidConfig(String),
}

fn check_fraction(name: &'static str, value: f64) -> Result<f64, EstimatorError> {
    if (0.0..=1.0).contains(&value) {
        Ok(value)
    } else {
        Err(EstimatorError::OutOfRange { name, value })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SelfScorePair {
    pub self_known: f64,
    pub self_unknown: f64,
}

impl SelfScorePair {
    pub fn new(self_known: f64, self_unknown: f64) -> Result<Self, EstimatorError> {
        Ok(SelfScorePair {
            self_known: check_fraction("self_known", self_known)?,
            self_unknown: check_fraction("self_unknown", self_unknown)?,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FactualityEstimate {
    pub sigma: f64,
}

/// `σ = (1 - SU) / (2 - SU - SK)`.
pub fn estimate_factuality(scores: SelfScorePair) -> Result<FactualityEstimate, EstimatorError> {
    let SelfScorePair { self_known, self_unknown } = SelfScorePair::new(scores.self_known, scores.self_unknown)?;
    if self_known + self_unknown >= 2.0 - DEGENERACY_EPS {
        return Err(EstimatorError::Degenerate { self_known, self_unknown });
    }
    let sigma = (1.0 - self_unknown) / (2.0 - self_unknown - self_known);
    Ok(FactualityEstimate {
        sigma: sigma.clamp(0.0, 1.0),
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FixedPoint {
    pub sigma: f64,
    pub iterations: usize,
    /// False when every σ is a fixed point (SK = SU = 1); `sigma` is then
    /// the starting value.
    pub identifiable: bool,
}

pub const ORACLE_START: f64 = 0.5;

/// Iterates `σ ← SK·σ + (1 - SU)·(1 - σ)` from σ₀ = 0.5. The map is affine
/// with slope `SK + SU - 1`; iteration stops once the contraction bound
/// guarantees the iterate is within `tol` of the fixed point.
pub fn fixed_point_oracle(
    self_known: f64,
    self_unknown: f64,
    tol: f64,
    max_iter: usize,
) -> Result<FixedPoint, EstimatorError> {
    let sk = check_fraction("self_known", self_known)?;
    let su = check_fraction("self_unknown", self_unknown)?;
    let step = |sigma: f64| sk * sigma + (1.0 - su) * (1.0 - sigma);
    let slope = (sk + su - 1.0).abs();
    if slope >= 1.0 && step(ORACLE_START) == ORACLE_START && step(0.0) == 0.0 {
        return Ok(FixedPoint {
            sigma: ORACLE_START,
            iterations: 0,
            identifiable: false,
        });
    }
    // |σ_{n+1} - σ*| <= slope / (1 - slope) * |σ_{n+1} - σ_n|
    let stop = if slope < 1.0 { tol * (1.0 - slope) / slope.max(f64::MIN_POSITIVE) } else { tol };
    let mut sigma = ORACLE_START;
    for iteration in 1..=max_iter {
        let next = step(sigma);
        let delta = (next - sigma).abs();
        sigma = next;
        if delta <= stop || delta == 0.0 {
            return Ok(FixedPoint {
                sigma,
                iterations: iteration,
                identifiable: true,
            });
        }
    }
    Err(EstimatorError::NonConvergence { iterations: max_iter })
}

/// One estimate per bucket, positionally.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "lowercase")]
pub enum BucketEstimate {
    Ok { sigma: f64 },
    Absent,
    Degenerate,
}

impl BucketEstimate {
    pub fn sigma(self) -> Option<f64> {
        match self {
            BucketEstimate::Ok { sigma } => Some(sigma),
            _ => None,
        }
    }
}

pub fn estimate_per_bucket(bucket_scores: &[Option<SelfScorePair>]) -> Vec<BucketEstimate> {
    bucket_scores
        .iter()
        .map(|pair| match pair {
            None => BucketEstimate::Absent,
            Some(pair) => match estimate_factuality(*pair) {
                Ok(e) => BucketEstimate::Ok { sigma: e.sigma },
                Err(_) => BucketEstimate::Degenerate,
            },
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimulationConfig {
    pub n_claims: u64,
    pub true_sigma: f64,
    pub self_known: f64,
    pub self_unknown: f64,
    pub seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimulationOutcome {
    pub n_supported: u64,
    pub n_unsupported: u64,
    pub n_supported_judged_correct: u64,
    pub n_unsupported_judged_incorrect: u64,
    pub empirical_self_known: Option<f64>,
    pub empirical_self_unknown: Option<f64>,
    /// Share of all claims the simulated model judges correct.
    pub empirical_judged_correct_fraction: f64,
    /// Share of Supported claims actually drawn.
    pub empirical_sigma: f64,
}

const GOLDEN_GAMMA: u64 = 0x9E37_79B9_7F4A_7C15;

/// The `counter`-th SplitMix64 output for `seed`.
pub fn splitmix64_at(seed: u64, counter: u64) -> u64 {
    let mut z = seed.wrapping_add(counter.wrapping_add(1).wrapping_mul(GOLDEN_GAMMA));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub fn uniform_at(seed: u64, counter: u64) -> f64 {
    (splitmix64_at(seed, counter) >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

pub fn simulate_claim_stream(cfg: &SimulationConfig) -> Result<SimulationOutcome, EstimatorError> {
    if cfg.n_claims == 0 {
        return Err(EstimatorError::InvalidConfig("n_claims must be positive".into()));
    }
    check_fraction("true_sigma", cfg.true_sigma)?;
    check_fraction("self_known", cfg.self_known)?;
    check_fraction("self_unknown", cfg.self_unknown)?;

    let (mut n_s, mut n_u, mut known, mut unknown) = (0u64, 0u64, 0u64, 0u64);
    for i in 0..cfg.n_claims {
        let supported = uniform_at(cfg.seed, 2 * i) < cfg.true_sigma;
        let judge = uniform_at(cfg.seed, 2 * i + 1);
        if supported {
            n_s += 1;
            known += u64::from(judge < cfg.self_known);
        } else {
            n_u += 1;
            unknown += u64::from(judge < cfg.self_unknown);
        }
    }
    let ratio = |a: u64, b: u64| (b > 0).then(|| a as f64 / b as f64);
    let judged_correct = known + (n_u - unknown);
    Ok(SimulationOutcome {
        n_supported: n_s,
        n_unsupported: n_u,
        n_supported_judged_correct: known,
        n_unsupported_judged_incorrect: unknown,
        empirical_self_known: ratio(known, n_s),
        empirical_self_unknown: ratio(unknown, n_u),
        empirical_judged_correct_fraction: judged_correct as f64 / cfg.n_claims as f64,
        empirical_sigma: n_s as f64 / cfg.n_claims as f64,
    })
}
