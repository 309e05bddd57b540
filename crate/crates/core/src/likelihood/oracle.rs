//! Quadrature reference for the closed-form marginal likelihood.
//!
//! Every group integral is evaluated numerically with adaptive
//! Gauss-Kronrod quadrature and composed the long way round: evidence of
//! the group, then the posterior predictive for the target, and for the
//! matching untreated block the desire-1 stratum first, then the desire-0
//! stratum under the updated parameter. Binomial coefficients are exact
//! integers. None of this shares code with the closed forms, so agreement
//! between the two is a genuine check. Intended for tests and small
//! counts only.

use std::collections::HashMap;
use std::sync::Mutex;

use thiserror::Error;

use super::BetaPrior;
use crate::partition::{GroupCounts, Tally};

pub const DEFAULT_GROUP_CAP: u64 = 64;

#[derive(Debug, Error, PartialEq)]
pub enum OracleError {
    #[error("group size {n} exceeds the quadrature oracle cap of {cap}")]
    CapExceeded { n: u64, cap: u64 },
    #[error("the quadrature oracle needs Beta parameters >= 1, got ({alpha}, {beta})")]
    UnsupportedPrior { alpha: f64, beta: f64 },
}

/// Quadrature evaluation of the log marginal likelihood under a uniform
/// prior, with the default group-size cap.
pub fn oracle_marginal(counts: &GroupCounts, target_response: bool) -> Result<f64, OracleError> {
    Oracle::new(BetaPrior::UNIFORM, DEFAULT_GROUP_CAP)?.log_marginal(counts, target_response)
}

#[derive(Debug)]
pub struct Oracle {
    alpha: f64,
    beta: f64,
    prior_norm: f64,
    cap: u64,
    /// Quadrature results keyed by `(successes, failures)`.
    moments: Mutex<HashMap<(u64, u64), f64>>,
}

impl Oracle {
    /// Beta parameters below 1 make the prior density unbounded at the
    /// ends of the interval, which this integrator does not handle.
    pub fn new(prior: BetaPrior, cap: u64) -> Result<Self, OracleError> {
        let (alpha, beta) = (prior.alpha(), prior.beta());
        if alpha < 1.0 || beta < 1.0 {
            return Err(OracleError::UnsupportedPrior { alpha, beta });
        }
        let mut oracle = Self { alpha, beta, prior_norm: 1.0, cap, moments: Mutex::default() };
        oracle.prior_norm = integrate(|p| oracle.unnormalized_prior(p), 0.0, 1.0);
        Ok(oracle)
    }

    fn unnormalized_prior(&self, p: f64) -> f64 {
        p.powf(self.alpha - 1.0) * (1.0 - p).powf(self.beta - 1.0)
    }

    /// `∫ p^s (1-p)^f π(p) dp`.
    fn moment(&self, s: u64, f: u64) -> f64 {
        if let Some(&m) = self.moments.lock().unwrap().get(&(s, f)) {
            return m;
        }
        let m = integrate(
            |p| p.powi(s as i32) * (1.0 - p).powi(f as i32) * self.unnormalized_prior(p),
            0.0,
            1.0,
        ) / self.prior_norm;
        self.moments.lock().unwrap().insert((s, f), m);
        m
    }

    fn check(&self, group: Tally) -> Result<(), OracleError> {
        if group.n > self.cap {
            Err(OracleError::CapExceeded { n: group.n, cap: self.cap })
        } else {
            Ok(())
        }
    }

    /// Evidence of an exchangeable group: `C(n,x) ∫ p^x (1-p)^(n-x) π(p) dp`.
    pub fn evidence(&self, group: Tally) -> Result<f64, OracleError> {
        self.check(group)?;
        Ok(binomial(group.n, group.x) * self.moment(group.x, group.n - group.x))
    }

    /// Comparable treated group followed by the target's own response.
    pub fn comparable(&self, group: Tally, target_response: bool) -> Result<f64, OracleError> {
        let evidence = self.evidence(group)?;
        let (s, f) = (group.x, group.n - group.x);
        let updated = if target_response { self.moment(s + 1, f) } else { self.moment(s, f + 1) };
        let predictive = updated / self.moment(s, f);
        Ok(predictive * evidence)
    }

    /// Matching untreated block, both desire strata under one parameter.
    pub fn pooled(&self, a00: Tally, a01: Tally) -> Result<f64, OracleError> {
        self.check(a00)?;
        self.check(a00.merge(a01))?;
        let evidence01 = self.evidence(a01)?;
        let (s01, f01) = (a01.x, a01.n - a01.x);
        let (s00, f00) = (a00.x, a00.n - a00.x);
        let conditional = binomial(a00.n, a00.x) * self.moment(s00 + s01, f00 + f01)
            / self.moment(s01, f01);
        Ok(conditional * evidence01)
    }

    pub fn log_marginal(
        &self,
        counts: &GroupCounts,
        target_response: bool,
    ) -> Result<f64, OracleError> {
        let a11 = self.comparable(counts.a11, target_response)?;
        let abar11 = self.evidence(counts.abar11)?;
        let a0 = self.pooled(counts.a00, counts.a01)?;
        let abar0 = self.evidence(counts.abar0)?;
        Ok(a11.ln() + abar11.ln() + a0.ln() + abar0.ln())
    }
}

/// Exact `C(n, k)` by the multiplicative formula in 128-bit integers.
pub fn binomial(n: u64, k: u64) -> f64 {
    assert!(k <= n);
    let k = k.min(n - k);
    let mut c: u128 = 1;
    for i in 0..k {
        c = c * u128::from(n - i) / u128::from(i + 1);
    }
    c as f64
}

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];
// Gauss weights for the nodes XGK[1], XGK[3], XGK[5], XGK[7].
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

/// 15-point Kronrod estimate and its distance from the embedded 7-point
/// Gauss estimate.
fn gauss_kronrod<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> (f64, f64) {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let fc = f(center);
    let mut kronrod = WGK[7] * fc;
    let mut gauss = WG[3] * fc;
    for i in 0..7 {
        let dx = half * XGK[i];
        let pair = f(center - dx) + f(center + dx);
        kronrod += WGK[i] * pair;
        if i % 2 == 1 {
            gauss += WG[i / 2] * pair;
        }
    }
    (kronrod * half, ((kronrod - gauss) * half).abs())
}

fn adaptive<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, whole: (f64, f64), depth: u32) -> f64 {
    let (estimate, error) = whole;
    if error <= 1e-15 * estimate.abs().max(1e-300) || depth == 0 {
        return estimate;
    }
    let mid = 0.5 * (a + b);
    let left = gauss_kronrod(f, a, mid);
    let right = gauss_kronrod(f, mid, b);
    adaptive(f, a, mid, left, depth - 1) + adaptive(f, mid, b, right, depth - 1)
}

/// Adaptive Gauss-Kronrod integral of `f` over `[a, b]`.
pub fn integrate<F: Fn(f64) -> f64>(f: F, a: f64, b: f64) -> f64 {
    let whole = gauss_kronrod(&f, a, b);
    adaptive(&f, a, b, whole, 40)
}
