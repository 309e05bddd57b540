//! Analysis settings: an optional JSON file overlaid by command-line flags.

use std::path::{Path, PathBuf};

use clap::Args;
use coe_core::causal::EstimatorKind;
use coe_core::dataset::TargetSpec;
use coe_core::model_space::{McmcConfig, PriorKind, DEFAULT_EXHAUSTIVE_CAP};
use coe_core::report::SearchMode;
use serde::Deserialize;

use crate::error::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PriorArg {
    Uniform,
    ChenChen,
}

impl From<PriorArg> for PriorKind {
    fn from(p: PriorArg) -> Self {
        match p {
            PriorArg::Uniform => PriorKind::Uniform,
            PriorArg::ChenChen => PriorKind::ChenChen,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SearchArg {
    Enumerate,
    Mh,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EstimatorArg {
    PosteriorMean,
    Mle,
}

impl From<EstimatorArg> for EstimatorKind {
    fn from(e: EstimatorArg) -> Self {
        match e {
            EstimatorArg::PosteriorMean => EstimatorKind::PosteriorMean,
            EstimatorArg::Mle => EstimatorKind::Mle,
        }
    }
}

/// Target given inline in a config file: either a full object or a
/// comma-separated list of covariate levels.
#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
pub enum TargetValue {
    Spec(TargetSpec),
    Text(String),
}

/// Flags shared by every command that analyses a dataset. Every field is
/// optional so that a config file can fill it in.
#[derive(Debug, Clone, Default, Args, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AnalysisArgs {
    /// JSON config file; flags given on the command line take precedence.
    #[arg(long)]
    #[serde(skip)]
    pub config: Option<PathBuf>,
    /// Trial CSV with columns id,T,E,R followed by the covariates.
    #[arg(long)]
    pub data: Option<PathBuf>,
    /// Target covariate levels as `1,0,1,...`, or a JSON file
    /// `{"covariates": [...], "desire": 1, "response": 1}`.
    #[arg(long)]
    #[serde(skip)]
    pub target: Option<String>,
    #[arg(skip)]
    #[serde(rename = "target")]
    pub target_value: Option<TargetValue>,
    /// Target's desire for treatment (overrides the target file).
    #[arg(long, value_parser = clap::value_parser!(u8).range(0..=1))]
    pub target_desire: Option<u8>,
    /// Target's observed response (overrides the target file).
    #[arg(long, value_parser = clap::value_parser!(u8).range(0..=1))]
    pub target_response: Option<u8>,
    /// Levels per covariate, e.g. `2,2,3`; all binary when omitted.
    #[arg(long, value_delimiter = ',')]
    pub cardinalities: Option<Vec<u32>>,
    #[arg(long, value_enum)]
    pub prior: Option<PriorArg>,
    #[arg(long, value_enum)]
    pub search: Option<SearchArg>,
    /// Metropolis-Hastings steps per chain, burn-in included.
    #[arg(long)]
    pub iterations: Option<u64>,
    /// Defaults to 10% of the iterations.
    #[arg(long)]
    pub burn_in: Option<u64>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub chains: Option<usize>,
    #[arg(long, value_enum)]
    pub estimator: Option<EstimatorArg>,
    /// Number of models listed in the report.
    #[arg(long)]
    pub top: Option<usize>,
    /// Largest k for exhaustive enumeration.
    #[arg(long)]
    pub exhaustive_cap: Option<usize>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// Fully resolved settings for one run.
#[derive(Debug, Clone)]
pub struct AnalysisConfig {
    pub data: PathBuf,
    pub target: TargetSpec,
    pub cardinalities: Option<Vec<u32>>,
    pub prior: PriorKind,
    pub search: SearchMode,
    pub mcmc: McmcConfig,
    pub estimator: EstimatorKind,
    pub top: usize,
    pub exhaustive_cap: usize,
    pub out: Option<PathBuf>,
}

pub const DEFAULT_ITERATIONS: u64 = 50_000;
pub const DEFAULT_TOP: usize = 10;

fn parse_levels(text: &str) -> Result<Vec<u32>, CliError> {
    text.split(',')
        .map(|v| {
            v.trim()
                .parse::<u32>()
                .map_err(|_| CliError::Config(format!("invalid target level `{v}`")))
        })
        .collect()
}

fn load_target(text: &str) -> Result<TargetSpec, CliError> {
    let path = Path::new(text);
    if path.is_file() {
        let raw = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("reading target {}: {e}", path.display())))?;
        serde_json::from_str(&raw)
            .map_err(|e| CliError::Config(format!("parsing target {}: {e}", path.display())))
    } else {
        Ok(TargetSpec::new(parse_levels(text)?))
    }
}

impl AnalysisArgs {
    /// Fields set here win over `base`.
    fn overlay(self, base: AnalysisArgs) -> AnalysisArgs {
        AnalysisArgs {
            config: self.config,
            data: self.data.or(base.data),
            target: self.target.or(base.target),
            target_value: self.target_value.or(base.target_value),
            target_desire: self.target_desire.or(base.target_desire),
            target_response: self.target_response.or(base.target_response),
            cardinalities: self.cardinalities.or(base.cardinalities),
            prior: self.prior.or(base.prior),
            search: self.search.or(base.search),
            iterations: self.iterations.or(base.iterations),
            burn_in: self.burn_in.or(base.burn_in),
            seed: self.seed.or(base.seed),
            chains: self.chains.or(base.chains),
            estimator: self.estimator.or(base.estimator),
            top: self.top.or(base.top),
            exhaustive_cap: self.exhaustive_cap.or(base.exhaustive_cap),
            out: self.out.or(base.out),
        }
    }

    pub fn resolve(self) -> Result<AnalysisConfig, CliError> {
        let merged = match &self.config {
            Some(path) => {
                let raw = std::fs::read_to_string(path).map_err(|e| {
                    CliError::Config(format!("reading config {}: {e}", path.display()))
                })?;
                let file: AnalysisArgs = serde_json::from_str(&raw).map_err(|e| {
                    CliError::Config(format!("parsing config {}: {e}", path.display()))
                })?;
                self.overlay(file)
            }
            None => self,
        };

        let data = merged.data.ok_or_else(|| CliError::Config("--data is required".into()))?;
        let mut target = match (merged.target, merged.target_value) {
            (Some(text), _) => load_target(&text)?,
            (None, Some(TargetValue::Spec(spec))) => spec,
            (None, Some(TargetValue::Text(text))) => load_target(&text)?,
            (None, None) => return Err(CliError::Config("--target is required".into())),
        };
        if let Some(d) = merged.target_desire {
            target.desire = d == 1;
        }
        if let Some(r) = merged.target_response {
            target.response = r == 1;
        }

        let iterations = merged.iterations.unwrap_or(DEFAULT_ITERATIONS);
        let mcmc = McmcConfig {
            iterations,
            burn_in: merged.burn_in.unwrap_or(iterations / 10),
            seed: merged.seed.unwrap_or(0),
            chains: merged.chains.unwrap_or(1),
        };
        let search = match merged.search.unwrap_or(SearchArg::Enumerate) {
            SearchArg::Enumerate => SearchMode::Enumerate,
            SearchArg::Mh => SearchMode::Mh,
        };
        if search == SearchMode::Mh {
            mcmc.validate().map_err(|e| CliError::Config(e.to_string()))?;
        }
        let top = merged.top.unwrap_or(DEFAULT_TOP);
        if top == 0 {
            return Err(CliError::Config("--top must be at least 1".into()));
        }
        Ok(AnalysisConfig {
            data,
            target,
            cardinalities: merged.cardinalities,
            prior: merged.prior.unwrap_or(PriorArg::Uniform).into(),
            search,
            mcmc,
            estimator: merged.estimator.unwrap_or(EstimatorArg::PosteriorMean).into(),
            top,
            exhaustive_cap: merged.exhaustive_cap.unwrap_or(DEFAULT_EXHAUSTIVE_CAP),
            out: merged.out,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flags_win_over_the_config_file() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = dir.path().join("cfg.json");
        std::fs::write(
            &cfg,
            r#"{"data": "a.csv", "target": "1,0", "prior": "chen-chen", "top": 3, "seed": 5}"#,
        )
        .unwrap();
        let args = AnalysisArgs {
            config: Some(cfg),
            top: Some(7),
            target: Some("0,1".into()),
            ..Default::default()
        };
        let resolved = args.resolve().unwrap();
        assert_eq!(resolved.data, PathBuf::from("a.csv"));
        assert_eq!(resolved.prior, PriorKind::ChenChen);
        assert_eq!(resolved.top, 7);
        assert_eq!(resolved.mcmc.seed, 5);
        assert_eq!(resolved.target.covariates, vec![0, 1]);
    }

    #[test]
    fn config_file_may_hold_a_full_target() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = dir.path().join("cfg.json");
        std::fs::write(
            &cfg,
            r#"{"data": "a.csv", "target": {"covariates": [1, 1], "desire": 0}}"#,
        )
        .unwrap();
        let args = AnalysisArgs { config: Some(cfg), ..Default::default() };
        let resolved = args.resolve().unwrap();
        assert_eq!(resolved.target.covariates, vec![1, 1]);
        assert!(!resolved.target.desire);
    }

    #[test]
    fn mh_needs_more_iterations_than_burn_in() {
        let args = AnalysisArgs {
            data: Some("a.csv".into()),
            target: Some("1".into()),
            search: Some(SearchArg::Mh),
            iterations: Some(100),
            burn_in: Some(100),
            ..Default::default()
        };
        assert!(matches!(args.resolve(), Err(CliError::Config(_))));
    }

    #[test]
    fn missing_data_is_a_config_error() {
        assert!(matches!(AnalysisArgs::default().resolve(), Err(CliError::Config(_))));
    }

    #[test]
    fn unknown_config_keys_are_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = dir.path().join("cfg.json");
        std::fs::write(&cfg, r#"{"data": "a.csv", "target": "1", "priro": "uniform"}"#).unwrap();
        let args = AnalysisArgs { config: Some(cfg), ..Default::default() };
        assert!(matches!(args.resolve(), Err(CliError::Config(_))));
    }
}
