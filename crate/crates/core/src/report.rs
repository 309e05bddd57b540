//! Per-model analysis report and figure data.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::causal::{risk_ratio, CausalEstimates, EstimatorKind};
use crate::dataset::{Dataset, TargetSpec};
use crate::likelihood::hypergeom_grid;
use crate::model_space::{McmcConfig, PosteriorTable, PriorKind};
use crate::partition::{sufficiency_diagnostics, GroupCounts, MatchIndex, ModelId};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SearchMode {
    Enumerate,
    Mh,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchSummary {
    pub mode: SearchMode,
    pub prior: PriorKind,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mcmc: Option<McmcConfig>,
    /// Models with positive posterior.
    pub support_size: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub samples: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetSummary {
    pub n: usize,
    pub k: usize,
    pub covariates: Vec<String>,
    pub target: TargetSpec,
}

/// One covariate the best model matches on, with the target's level.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SelectedCharacteristic {
    pub index: usize,
    pub name: String,
    pub level: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelRow {
    pub model: ModelId,
    pub covariates: Vec<String>,
    pub posterior: f64,
    pub log_marginal: Option<f64>,
    #[serde(serialize_with = "crate::json::finite_or_null", deserialize_with = "crate::json::null_as_neg_infinity")]
    pub log_prior: f64,
    pub p_treated: Option<f64>,
    pub p_untreated: Option<f64>,
    pub rr: Option<f64>,
    pub pc_lower: Option<f64>,
    pub treated_ratio: Option<f64>,
    pub untreated_e_ratio: Option<f64>,
    pub counts: GroupCounts,
}

/// Selected characteristics and risk ratio of the highest-posterior model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BestModel {
    pub model: ModelId,
    pub selected: Vec<SelectedCharacteristic>,
    pub posterior: f64,
    pub rr: Option<f64>,
    pub pc_lower: Option<f64>,
    pub group_sizes: GroupCounts,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub dataset: DatasetSummary,
    pub search: SearchSummary,
    pub estimator: EstimatorKind,
    pub best: BestModel,
    pub models: Vec<ModelRow>,
}


#[derive(Debug, Clone, PartialEq)]
pub struct ReportOptions {
    pub estimator: EstimatorKind,
    pub top: usize,
    pub mode: SearchMode,
    pub prior: PriorKind,
    pub mcmc: Option<McmcConfig>,
}

fn names_of(data: &Dataset, model: ModelId) -> Vec<String> {
    model.indices().map(|j| data.schema().names()[j].clone()).collect()
}

fn row(data: &Dataset, counts: GroupCounts, entry: &crate::model_space::PosteriorEntry, kind: EstimatorKind) -> ModelRow {
    let CausalEstimates { p_treated, p_untreated, rr, pc_lower, .. } = risk_ratio(&counts, kind);
    let diag = sufficiency_diagnostics(&counts);
    ModelRow {
        model: entry.model,
        covariates: names_of(data, entry.model),
        posterior: entry.posterior,
        log_marginal: entry.log_marginal,
        log_prior: entry.log_prior,
        p_treated,
        p_untreated,
        rr,
        pc_lower,
        treated_ratio: diag.treated_ratio,
        untreated_e_ratio: diag.untreated_e_ratio,
        counts,
    }
}

/// Builds the report from a posterior table. Rows cover the first
/// `options.top` models with positive posterior.
///
/// Panics if the table is empty.
pub fn build_report(data: &Dataset, table: &PosteriorTable, options: &ReportOptions) -> Report {
    let index = MatchIndex::new(data);
    let best_entry = table.best().expect("posterior table is empty");
    let best_counts = index.counts(best_entry.model);
    let best_estimates = risk_ratio(&best_counts, options.estimator);
    let best = BestModel {
        model: best_entry.model,
        selected: best_entry
            .model
            .indices()
            .map(|j| SelectedCharacteristic {
                index: j,
                name: data.schema().names()[j].clone(),
                level: data.target().covariates[j],
            })
            .collect(),
        posterior: best_entry.posterior,
        rr: best_estimates.rr,
        pc_lower: best_estimates.pc_lower,
        group_sizes: best_counts,
    };
    let models = table
        .entries
        .iter()
        .filter(|e| e.posterior > 0.0)
        .take(options.top)
        .map(|e| row(data, index.counts(e.model), e, options.estimator))
        .collect();
    Report {
        dataset: DatasetSummary {
            n: data.len(),
            k: data.k(),
            covariates: data.schema().names().to_vec(),
            target: data.target().clone(),
        },
        search: SearchSummary {
            mode: options.mode,
            prior: options.prior,
            mcmc: options.mcmc,
            support_size: table.support_size(),
            samples: table.samples,
        },
        estimator: options.estimator,
        best,
        models,
    }
}

/// One point of the treated-ratio versus untreated desire-ratio scatter.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiagnosticRow {
    pub model: ModelId,
    pub posterior: f64,
    pub rr: Option<f64>,
    pub treated_ratio: Option<f64>,
    pub untreated_e_ratio: Option<f64>,
    /// Set on the highest-posterior model only.
    pub best: bool,
}

/// One row per model in the table, in table order.
pub fn diagnostic_rows(data: &Dataset, table: &PosteriorTable, estimator: EstimatorKind) -> Vec<DiagnosticRow> {
    let index = MatchIndex::new(data);
    table
        .entries
        .iter()
        .enumerate()
        .map(|(i, e)| {
            let counts = index.counts(e.model);
            let diag = sufficiency_diagnostics(&counts);
            DiagnosticRow {
                model: e.model,
                posterior: e.posterior,
                rr: risk_ratio(&counts, estimator).rr,
                treated_ratio: diag.treated_ratio,
                untreated_e_ratio: diag.untreated_e_ratio,
                best: i == 0,
            }
        })
        .collect()
}

fn opt(v: Option<f64>) -> String {
    v.map(|v| v.to_string()).unwrap_or_default()
}

/// CSV with header `model,posterior,rr,treated_ratio,untreated_e_ratio,best`.
/// Model indices are `;`-separated; undefined values are empty fields.
pub fn write_diagnostics_csv<W: Write>(rows: &[DiagnosticRow], writer: W) -> csv::Result<()> {
    let mut out = csv::Writer::from_writer(writer);
    out.write_record(["model", "posterior", "rr", "treated_ratio", "untreated_e_ratio", "best"])?;
    for r in rows {
        let model = r.model.indices().map(|j| j.to_string()).collect::<Vec<_>>().join(";");
        out.write_record([
            model,
            r.posterior.to_string(),
            opt(r.rr),
            opt(r.treated_ratio),
            opt(r.untreated_e_ratio),
            u8::from(r.best).to_string(),
        ])?;
    }
    out.flush()?;
    Ok(())
}

/// Grid of the matching-untreated factor: the first row is
/// `x00\x01,0,1,...,n01` and each following row starts with `x00`.
pub fn write_hypergeom_grid<W: Write>(n00: u64, n01: u64, writer: W) -> csv::Result<()> {
    let mut out = csv::Writer::from_writer(writer);
    let mut header = vec!["x00\\x01".to_string()];
    header.extend((0..=n01).map(|x| x.to_string()));
    out.write_record(&header)?;
    for (x00, values) in hypergeom_grid(n00, n01).into_iter().enumerate() {
        let mut row = vec![x00.to_string()];
        row.extend(values.iter().map(f64::to_string));
        out.write_record(&row)?;
    }
    out.flush()?;
    Ok(())
}
