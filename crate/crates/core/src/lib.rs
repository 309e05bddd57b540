//! Reference-group selection for individual causal questions.
//!
//! Given a randomized trial in which every subject also reported whether
//! they wanted the treatment, this crate scores each subset of background
//! covariates by how well the induced grouping supports treating the target
//! individual like the matched treated subjects (comparability) and like
//! the matched untreated subjects regardless of their desire
//! (sufficiency). Scores are exact Beta-Binomial marginal likelihoods
//! combined with a prior over subsets; the best subsets then yield a risk
//! ratio and the lower bound `max{0, 1 - 1/RR}` on the probability of
//! causation.
//!
//! ```
//! use coe_core::prelude::*;
//!
//! let mut config = SimulationConfig::student_cohort(161);
//! config.covariate_cardinalities.truncate(4);
//! config.covariate_names.as_mut().unwrap().truncate(4);
//! config.desire_model.covariate_effects.clear();
//! config.response_model.covariate_effects.clear();
//! config.target.as_mut().unwrap().covariates.truncate(4);
//! let data = simulate_trial(&config, 1).unwrap();
//!
//! let table = enumerate_posterior(&data, PriorKind::ChenChen, &SearchOptions::default()).unwrap();
//! let best = table.best().unwrap();
//! let estimates = risk_ratio(&partition_counts(&data, best.model), EstimatorKind::PosteriorMean);
//! assert!(estimates.rr.unwrap() > 0.0);
//! ```

pub mod causal;
pub mod dataset;
mod json;
pub mod likelihood;
pub mod model_space;
pub mod partition;
pub mod report;

use thiserror::Error;

/// Any failure from this crate, tagged by the module it came from.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dataset: {0}")]
    Data(#[from] dataset::DataError),
    #[error("simulation: {0}")]
    Config(#[from] dataset::ConfigError),
    #[error("likelihood: {0}")]
    Prior(#[from] likelihood::PriorError),
    #[error("likelihood oracle: {0}")]
    Oracle(#[from] likelihood::oracle::OracleError),
    #[error("model search: {0}")]
    Search(#[from] model_space::SearchError),
    #[error("causal: {0}")]
    Causal(#[from] causal::CausalError),
}

pub mod prelude {
    pub use crate::causal::{
        err, orr, pc_lower_bound, risk_ratio, tian_pearl, CausalEstimates, EstimatorKind,
        Probability, TianPearl, TianPearlInputs,
    };
    pub use crate::dataset::{
        load_dataset, read_dataset, save_dataset, simulate_trial, write_dataset, CovariateSchema,
        Dataset, IngestConfig, SimulationConfig, TargetSpec, TrialRecord,
    };
    pub use crate::likelihood::{
        factor_a0, factor_a11, factor_exchangeable, hypergeom_grid, log_marginal, BetaPrior,
        LogMarginal,
    };
    pub use crate::model_space::{
        enumerate_posterior, log_prior, mh_sample, top_models, McmcConfig, ModelPrior,
        PosteriorEntry, PosteriorTable, PriorKind, SearchOptions,
    };
    pub use crate::partition::{
        partition_counts, sufficiency_diagnostics, GroupCounts, MatchIndex, ModelId, Tally,
    };
    pub use crate::report::{build_report, Report, ReportOptions, SearchMode};
    pub use crate::Error;
}
