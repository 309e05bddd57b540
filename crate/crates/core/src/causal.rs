//! Risk ratio and probability-of-causation bounds for the target.
//!
//! The probability of causation for a target who was treated and responded
//! is `P(R0 = 0 | H, T = 1, R1 = 1)`. It is not identified from trial data,
//! but it is bounded below by `max{0, 1 - 1/RR}` where
//! `RR = P(R1 = 1 | H, T = 1) / P(R0 = 1 | H, T = 1)`. The numerator is
//! estimated from the comparable treated group and the denominator from the
//! matching untreated subjects pooled over desire.
//!
//! Results that need a zero denominator are `None`, never NaN.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::partition::{GroupCounts, Tally};

#[derive(Debug, Error, PartialEq)]
pub enum CausalError {
    #[error("{0} is not a probability")]
    NotAProbability(f64),
}

/// A number in `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct Probability(f64);

impl Probability {
    pub fn new(p: f64) -> Result<Self, CausalError> {
        if (0.0..=1.0).contains(&p) {
            Ok(Probability(p))
        } else {
            Err(CausalError::NotAProbability(p))
        }
    }

    pub fn get(self) -> f64 {
        self.0
    }
}

impl TryFrom<f64> for Probability {
    type Error = CausalError;
    fn try_from(p: f64) -> Result<Self, CausalError> {
        Probability::new(p)
    }
}

impl From<Probability> for f64 {
    fn from(p: Probability) -> f64 {
        p.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EstimatorKind {
    /// `(x + 1) / (n + 2)`, the mean under a uniform prior.
    #[default]
    PosteriorMean,
    /// `x / n`.
    Mle,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CausalEstimates {
    /// Estimate of `P(R1 = 1 | H, T = 1)` from the comparable treated group.
    pub p_treated: Option<f64>,
    /// Estimate of `P(R0 = 1 | H, T = 1)` from the pooled matching untreated.
    pub p_untreated: Option<f64>,
    pub rr: Option<f64>,
    pub pc_lower: Option<f64>,
    pub estimator: EstimatorKind,
}

fn estimate(group: Tally, kind: EstimatorKind) -> Option<f64> {
    match kind {
        EstimatorKind::PosteriorMean => Some((group.x + 1) as f64 / (group.n + 2) as f64),
        EstimatorKind::Mle => group.ratio(),
    }
}

pub fn risk_ratio(counts: &GroupCounts, kind: EstimatorKind) -> CausalEstimates {
    let p_treated = estimate(counts.a11, kind);
    let p_untreated = estimate(counts.a0(), kind);
    let rr = match (p_treated, p_untreated) {
        (Some(t), Some(u)) if u > 0.0 => Some(t / u),
        _ => None,
    };
    CausalEstimates { p_treated, p_untreated, rr, pc_lower: rr.map(pc_lower_bound), estimator: kind }
}

/// `max{0, 1 - 1/rr}` for a non-negative risk ratio.
pub fn pc_lower_bound(rr: f64) -> f64 {
    debug_assert!(rr >= 0.0, "negative risk ratio {rr}");
    if rr <= 1.0 {
        0.0
    } else {
        1.0 - 1.0 / rr
    }
}

/// Excess risk ratio `(p1 - p0) / p1`; may be negative.
pub fn err(p1: Probability, p0: Probability) -> Option<f64> {
    (p1.0 > 0.0).then(|| (p1.0 - p0.0) / p1.0)
}

/// Observational risk ratio expression `1 - 1/(p_t1 / p_t0)`.
pub fn orr(p_t1: Probability, p_t0: Probability) -> Option<f64> {
    (p_t1.0 > 0.0).then(|| 1.0 - p_t0.0 / p_t1.0)
}

/// Inputs of the two-source probability of causation expression.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TianPearlInputs {
    /// Observational `P(R = 1 | T = 1, H)`.
    pub obs_r1_given_t1: Probability,
    /// Observational `P(R = 0 | T = 1, H)`.
    pub obs_r0_given_t1: Probability,
    /// Observational `P(R = 1 | T = 0, H)`.
    pub obs_r1_given_t0: Probability,
    /// Experimental `P(R = 1 | T = 0, H)`.
    pub exp_r1_given_t0: Probability,
    /// Observational joint `P(R = 1, T = 1 | H)`.
    pub obs_r1_and_t1: Probability,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TianPearl {
    pub first_term: f64,
    pub second_term: f64,
    pub raw: f64,
    pub clamped: f64,
}

/// Evaluates the two-term expression exactly in its published form:
///
/// ```text
/// [P(R=1|T=1) - P(R=0|T=1)] / P(R=1|T=1)
///   + [P_obs(R=1|T=0) - P_exp(R=1|T=0)] / P_obs(R=1, T=1)
/// ```
///
/// The first numerator as published subtracts `P(R=0|T=1)` rather than the
/// untreated success probability found in the original derivation. It is
/// kept as published, so label the output accordingly when reporting it.
pub fn tian_pearl(inputs: &TianPearlInputs) -> Option<TianPearl> {
    let p1 = inputs.obs_r1_given_t1.0;
    let joint = inputs.obs_r1_and_t1.0;
    if p1 == 0.0 || joint == 0.0 {
        return None;
    }
    let first_term = (p1 - inputs.obs_r0_given_t1.0) / p1;
    let second_term = (inputs.obs_r1_given_t0.0 - inputs.exp_r1_given_t0.0) / joint;
    let raw = first_term + second_term;
    Some(TianPearl { first_term, second_term, raw, clamped: raw.clamp(0.0, 1.0) })
}
