//! Closed-form marginal likelihood of the observed responses under a model.
//!
//! Each of the four parameter blocks (comparable treated, other treated,
//! matching untreated, other untreated) carries an independent Beta prior,
//! so the marginal likelihood factorizes into four Beta-Binomial terms.
//! Responses are scored as success counts, so every group factor includes
//! its binomial coefficient. The comparable treated factor also contains
//! the predictive probability of the target's own response, and the
//! matching-untreated factor pools both desire strata under one parameter,
//! which makes it a hypergeometric (Fisher exact test) weight times the
//! pooled evidence.
//!
//! Everything is computed on the natural-log scale.

pub mod oracle;

use serde::{Deserialize, Serialize};
use statrs::function::beta::ln_beta;
use statrs::function::factorial::ln_binomial;
use thiserror::Error;

use crate::partition::{GroupCounts, Tally};

#[derive(Debug, Error, PartialEq)]
pub enum PriorError {
    #[error("Beta prior parameters must be positive and finite, got ({alpha}, {beta})")]
    InvalidBeta { alpha: f64, beta: f64 },
}

/// Beta(α, β) prior shared by every group parameter.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BetaPrior {
    alpha: f64,
    beta: f64,
}

impl Default for BetaPrior {
    fn default() -> Self {
        Self::UNIFORM
    }
}

impl BetaPrior {
    pub const UNIFORM: BetaPrior = BetaPrior { alpha: 1.0, beta: 1.0 };

    pub fn new(alpha: f64, beta: f64) -> Result<Self, PriorError> {
        if alpha > 0.0 && beta > 0.0 && alpha.is_finite() && beta.is_finite() {
            Ok(Self { alpha, beta })
        } else {
            Err(PriorError::InvalidBeta { alpha, beta })
        }
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn is_uniform(&self) -> bool {
        self.alpha == 1.0 && self.beta == 1.0
    }

    /// Log evidence of `x` successes in `n` exchangeable trials.
    pub fn factor_exchangeable(&self, group: Tally) -> f64 {
        let Tally { n, x } = group;
        debug_assert!(x <= n);
        if self.is_uniform() {
            return -((n + 1) as f64).ln();
        }
        ln_binomial(n, x) + ln_beta(self.alpha + x as f64, self.beta + (n - x) as f64)
            - ln_beta(self.alpha, self.beta)
    }

    /// Log evidence of the comparable treated group together with the
    /// target's own response.
    pub fn factor_a11(&self, group: Tally, target_response: bool) -> f64 {
        let Tally { n, x } = group;
        debug_assert!(x <= n);
        let hits = if target_response { self.alpha + x as f64 } else { self.beta + (n - x) as f64 };
        let predictive = hits.ln() - (self.alpha + self.beta + n as f64).ln();
        predictive + self.factor_exchangeable(group)
    }

    /// Log evidence of the matching untreated subjects, both desire strata
    /// sharing one success probability.
    pub fn factor_a0(&self, a00: Tally, a01: Tally) -> f64 {
        debug_assert!(a00.x <= a00.n && a01.x <= a01.n);
        let pooled = a00.merge(a01);
        let fisher = ln_binomial(a00.n, a00.x) + ln_binomial(a01.n, a01.x)
            - ln_binomial(pooled.n, pooled.x);
        fisher + self.factor_exchangeable(pooled)
    }

    pub fn log_marginal(&self, counts: &GroupCounts, target_response: bool) -> LogMarginal {
        let factors = FactorBreakdown {
            a11: self.factor_a11(counts.a11, target_response),
            abar11: self.factor_exchangeable(counts.abar11),
            a0: self.factor_a0(counts.a00, counts.a01),
            abar0: self.factor_exchangeable(counts.abar0),
        };
        LogMarginal { log_value: factors.sum(), factors }
    }
}

/// The four per-group log factors.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FactorBreakdown {
    pub a11: f64,
    pub abar11: f64,
    pub a0: f64,
    pub abar0: f64,
}

impl FactorBreakdown {
    pub fn sum(&self) -> f64 {
        self.a11 + self.abar11 + self.a0 + self.abar0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LogMarginal {
    pub log_value: f64,
    pub factors: FactorBreakdown,
}

/// [`BetaPrior::factor_a11`] under the uniform prior:
/// `log[(x+1)/(n+2) * 1/(n+1)]` for a successful target.
pub fn factor_a11(group: Tally, target_response: bool) -> f64 {
    BetaPrior::UNIFORM.factor_a11(group, target_response)
}

/// `log(1/(n+1))`, whatever the number of successes.
pub fn factor_exchangeable(group: Tally) -> f64 {
    BetaPrior::UNIFORM.factor_exchangeable(group)
}

pub fn factor_a0(a00: Tally, a01: Tally) -> f64 {
    BetaPrior::UNIFORM.factor_a0(a00, a01)
}

pub fn log_marginal(counts: &GroupCounts, target_response: bool) -> LogMarginal {
    BetaPrior::UNIFORM.log_marginal(counts, target_response)
}

/// `exp(factor_a0)` for every `(x00, x01)` with the given stratum sizes;
/// row index is `x00`, column index is `x01`.
pub fn hypergeom_grid(n00: u64, n01: u64) -> Vec<Vec<f64>> {
    (0..=n00)
        .map(|x00| {
            (0..=n01)
                .map(|x01| factor_a0(Tally::new(n00, x00), Tally::new(n01, x01)).exp())
                .collect()
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn t(n: u64, x: u64) -> Tally {
        Tally::new(n, x)
    }

    #[test]
    fn a11_examples() {
        assert_relative_eq!(factor_a11(t(0, 0), true), 0.5f64.ln(), max_relative = 1e-15);
        assert_relative_eq!(factor_a11(t(10, 10), true), (1.0f64 / 12.0).ln(), max_relative = 1e-14);
        assert_relative_eq!(factor_a11(t(4, 2), false), (1.0f64 / 10.0).ln(), max_relative = 1e-14);
    }

    #[test]
    fn exchangeable_examples() {
        assert_relative_eq!(factor_exchangeable(t(5, 3)), (1.0f64 / 6.0).ln());
        assert_eq!(factor_exchangeable(t(5, 0)), factor_exchangeable(t(5, 3)));
        assert_eq!(factor_exchangeable(t(0, 0)), 0.0);
    }

    #[test]
    fn a0_examples() {
        let expected = (252.0f64 * 252.0 / 184_756.0 / 21.0).ln();
        assert_relative_eq!(factor_a0(t(10, 5), t(10, 5)), expected, max_relative = 1e-13);
        for x in 0..=7 {
            assert_relative_eq!(
                factor_a0(t(0, 0), t(7, x)),
                factor_exchangeable(t(7, x)),
                max_relative = 1e-14
            );
        }
    }

    #[test]
    fn a0_corner_is_the_minimum_of_the_ten_by_ten_grid() {
        let corner = factor_a0(t(10, 0), t(10, 10));
        for x00 in 0..=10 {
            for x01 in 0..=10 {
                assert!(factor_a0(t(10, x00), t(10, x01)) >= corner - 1e-12);
            }
        }
        assert_relative_eq!(corner, (1.0f64 / 184_756.0 / 21.0).ln(), max_relative = 1e-13);
    }

    #[test]
    fn empty_data_keeps_only_the_target_predictive() {
        let m = log_marginal(&GroupCounts::default(), true);
        assert_relative_eq!(m.log_value, 0.5f64.ln());
        assert_eq!(m.log_value, m.factors.sum());
    }

    #[test]
    fn enlarging_an_exchangeable_group_adds_its_ratio() {
        let mut counts = GroupCounts {
            a11: t(4, 3),
            abar11: t(5, 2),
            a00: t(3, 1),
            a01: t(2, 2),
            abar0: t(6, 1),
        };
        let before = log_marginal(&counts, true).log_value;
        counts.abar11 = t(11, 2);
        let after = log_marginal(&counts, true).log_value;
        assert_relative_eq!(after - before, (6.0f64 / 12.0).ln(), max_relative = 1e-12);
    }

    #[test]
    fn general_prior_reduces_to_closed_form_at_uniform() {
        // Slightly perturbed parameters take the general ln-beta route.
        let general = BetaPrior::new(1.0 + 1e-12, 1.0).unwrap();
        for n in 0..12 {
            for x in 0..=n {
                for r in [false, true] {
                    assert_relative_eq!(
                        general.factor_a11(t(n, x), r),
                        factor_a11(t(n, x), r),
                        epsilon = 1e-9
                    );
                }
                assert_relative_eq!(
                    general.factor_a0(t(n, x), t(3, 1)),
                    factor_a0(t(n, x), t(3, 1)),
                    epsilon = 1e-9
                );
            }
        }
    }

    #[test]
    fn informative_prior_makes_exchangeable_factor_depend_on_successes() {
        let prior = BetaPrior::new(5.0, 1.0).unwrap();
        assert!(prior.factor_exchangeable(t(5, 5)) > prior.factor_exchangeable(t(5, 0)));
        // Beta-Binomial(5; 5, 1) at x = 5: C(5,5) B(10, 1) / B(5, 1) = 5/10.
        assert_relative_eq!(prior.factor_exchangeable(t(5, 5)), 0.5f64.ln(), max_relative = 1e-12);
    }

    #[test]
    fn rejects_bad_beta_parameters() {
        assert!(BetaPrior::new(0.0, 1.0).is_err());
        assert!(BetaPrior::new(1.0, f64::NAN).is_err());
        assert!(BetaPrior::new(0.5, 0.5).is_ok());
    }

    #[test]
    fn log_marginal_never_exceeds_zero() {
        for n in 0..10 {
            for x in 0..=n {
                let c = GroupCounts { a11: t(n, x), a00: t(n, n - x), a01: t(n, x), ..Default::default() };
                assert!(log_marginal(&c, true).log_value <= 0.0);
                assert!(log_marginal(&c, false).log_value <= 0.0);
            }
        }
    }

    #[test]
    fn grid_shape_for_one_empty_stratum() {
        let grid = hypergeom_grid(0, 5);
        assert_eq!(grid.len(), 1);
        assert_eq!(grid[0].len(), 6);
        for v in &grid[0] {
            assert_relative_eq!(*v, 1.0 / 6.0, max_relative = 1e-14);
        }
    }
}
