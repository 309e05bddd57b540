//! Benchmark fixtures shared by the criterion benches.

use coe_core::dataset::{simulate_trial, Dataset, SimulationConfig};

/// Student-cohort trial truncated to `k` covariates.
pub fn cohort(n: usize, k: usize, seed: u64) -> Dataset {
    let mut config = SimulationConfig::student_cohort(n);
    config.covariate_cardinalities.truncate(k);
    if let Some(names) = config.covariate_names.as_mut() {
        names.truncate(k);
    }
    config.desire_model.covariate_effects.retain(|e| e.covariate < k);
    config.response_model.covariate_effects.retain(|e| e.covariate < k);
    if let Some(target) = config.target.as_mut() {
        target.covariates.truncate(k);
    }
    simulate_trial(&config, seed).expect("cohort config is valid")
}
