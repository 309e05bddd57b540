//! Trial datasets: schema, records, the target individual, CSV ingestion
//! and a seeded generator for synthetic studies.
//!
//! A dataset is a randomized trial in which every subject also states
//! whether they wanted the treatment (`E`). The target individual is kept
//! apart from the records: their response is scored predictively against the
//! group they are matched with, so they must never be counted inside it.

use std::collections::HashSet;
use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Hard upper bound on the number of covariates; models are stored as
/// 64-bit inclusion masks.
pub const MAX_COVARIATES: usize = 64;

#[derive(Debug, Error)]
pub enum DataError {
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
    #[error("schema error: {0}")]
    Schema(String),
    #[error("row {row}, column {column}: {message}")]
    Row {
        /// 1-based data row index (the header is row 0).
        row: usize,
        column: String,
        message: String,
    },
    #[error("target error: {0}")]
    Target(String),
}

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("invalid generator config: {0}")]
    Invalid(String),
    #[error(transparent)]
    Data(#[from] DataError),
}

/// Ordered covariate labels together with their number of levels.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CovariateSchema {
    names: Vec<String>,
    cardinalities: Vec<u32>,
}

impl CovariateSchema {
    pub fn new(names: Vec<String>, cardinalities: Vec<u32>) -> Result<Self, DataError> {
        if names.is_empty() {
            return Err(DataError::Schema("at least one covariate is required".into()));
        }
        if names.len() > MAX_COVARIATES {
            return Err(DataError::Schema(format!(
                "{} covariates given, at most {MAX_COVARIATES} are supported",
                names.len()
            )));
        }
        if names.len() != cardinalities.len() {
            return Err(DataError::Schema(format!(
                "{} covariate names but {} cardinalities",
                names.len(),
                cardinalities.len()
            )));
        }
        let mut seen = HashSet::new();
        for name in &names {
            if name.trim().is_empty() {
                return Err(DataError::Schema("covariate names must be non-empty".into()));
            }
            if !seen.insert(name.as_str()) {
                return Err(DataError::Schema(format!("duplicate covariate name `{name}`")));
            }
        }
        if let Some((j, c)) = cardinalities.iter().enumerate().find(|(_, &c)| c < 2) {
            return Err(DataError::Schema(format!(
                "covariate `{}` has cardinality {c}, at least 2 is required",
                names[j]
            )));
        }
        Ok(Self { names, cardinalities })
    }

    /// `k` binary covariates named `H1..Hk`.
    pub fn binary(k: usize) -> Result<Self, DataError> {
        Self::new((1..=k).map(|j| format!("H{j}")).collect(), vec![2; k])
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn cardinalities(&self) -> &[u32] {
        &self.cardinalities
    }

    /// On failure returns the offending column name (`None` for a length
    /// mismatch) and a message.
    fn check_levels(&self, levels: &[u32]) -> Result<(), (Option<&str>, String)> {
        if levels.len() != self.len() {
            return Err((
                None,
                format!("expected {} covariate values, found {}", self.len(), levels.len()),
            ));
        }
        for (j, (&level, &card)) in levels.iter().zip(&self.cardinalities).enumerate() {
            if level >= card {
                return Err((
                    Some(&self.names[j]),
                    format!("level {level} outside declared cardinality {card}"),
                ));
            }
        }
        Ok(())
    }
}

fn target_error(column: Option<&str>, message: String) -> DataError {
    match column {
        Some(name) => DataError::Target(format!("{name}: {message}")),
        None => DataError::Target(message),
    }
}

/// One study subject.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub id: String,
    pub treatment: bool,
    pub desire: bool,
    pub response: bool,
    pub covariates: Vec<u32>,
}

/// The individual whose case is being assessed.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TargetSpec {
    pub covariates: Vec<u32>,
    #[serde(default = "yes", with = "binary_flag")]
    pub desire: bool,
    #[serde(default = "yes", with = "binary_flag")]
    pub response: bool,
}

fn yes() -> bool {
    true
}

impl TargetSpec {
    /// A target that desired the treatment, took it and responded.
    pub fn new(covariates: Vec<u32>) -> Self {
        Self { covariates, desire: true, response: true }
    }
}

/// Accept both `0/1` and `false/true` for binary flags in JSON.
mod binary_flag {
    use serde::de::{self, Deserializer, Visitor};
    use serde::Serializer;
    use std::fmt;

    pub fn serialize<S: Serializer>(v: &bool, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_u8(u8::from(*v))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<bool, D::Error> {
        struct Flag;
        impl Visitor<'_> for Flag {
            type Value = bool;
            fn expecting(&self, f: &mut fmt::Formatter) -> fmt::Result {
                f.write_str("0, 1, false or true")
            }
            fn visit_bool<E: de::Error>(self, v: bool) -> Result<bool, E> {
                Ok(v)
            }
            fn visit_u64<E: de::Error>(self, v: u64) -> Result<bool, E> {
                match v {
                    0 => Ok(false),
                    1 => Ok(true),
                    _ => Err(E::custom(format!("binary flag must be 0 or 1, got {v}"))),
                }
            }
            fn visit_i64<E: de::Error>(self, v: i64) -> Result<bool, E> {
                match v {
                    0 => Ok(false),
                    1 => Ok(true),
                    _ => Err(E::custom(format!("binary flag must be 0 or 1, got {v}"))),
                }
            }
        }
        d.deserialize_any(Flag)
    }
}

/// A validated trial dataset plus the target individual. Immutable once
/// constructed.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Dataset {
    schema: CovariateSchema,
    records: Vec<TrialRecord>,
    target: TargetSpec,
}

impl Dataset {
    pub fn new(
        schema: CovariateSchema,
        records: Vec<TrialRecord>,
        target: TargetSpec,
    ) -> Result<Self, DataError> {
        for (i, record) in records.iter().enumerate() {
            schema.check_levels(&record.covariates).map_err(|(column, message)| DataError::Row {
                row: i + 1,
                column: column.unwrap_or("covariates").to_string(),
                message,
            })?;
        }
        schema
            .check_levels(&target.covariates)
            .map_err(|(column, message)| target_error(column, message))?;
        Ok(Self { schema, records, target })
    }

    pub fn schema(&self) -> &CovariateSchema {
        &self.schema
    }

    pub fn records(&self) -> &[TrialRecord] {
        &self.records
    }

    pub fn target(&self) -> &TargetSpec {
        &self.target
    }

    /// Number of covariates.
    pub fn k(&self) -> usize {
        self.schema.len()
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// Same records and schema, different target individual.
    pub fn with_target(&self, target: TargetSpec) -> Result<Self, DataError> {
        self.schema
            .check_levels(&target.covariates)
            .map_err(|(column, message)| target_error(column, message))?;
        Ok(Self { schema: self.schema.clone(), records: self.records.clone(), target })
    }
}

/// Column naming and declared levels used when reading a CSV file.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct IngestConfig {
    pub id_column: String,
    pub treatment_column: String,
    pub desire_column: String,
    pub response_column: String,
    /// Declared levels per covariate, in header order. `None` means every
    /// covariate is binary.
    pub cardinalities: Option<Vec<u32>>,
}

impl Default for IngestConfig {
    fn default() -> Self {
        Self {
            id_column: "id".into(),
            treatment_column: "T".into(),
            desire_column: "E".into(),
            response_column: "R".into(),
            cardinalities: None,
        }
    }
}

/// Reads a trial CSV. Every column that is not one of the id/T/E/R columns
/// is a covariate, in header order.
pub fn load_dataset(
    path: impl AsRef<Path>,
    config: &IngestConfig,
    target: TargetSpec,
) -> Result<Dataset, DataError> {
    read_dataset(File::open(path)?, config, target)
}

pub fn read_dataset<R: Read>(
    reader: R,
    config: &IngestConfig,
    target: TargetSpec,
) -> Result<Dataset, DataError> {
    let mut csv = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let header = csv.headers()?.clone();
    if header.is_empty() || (header.len() == 1 && header[0].is_empty()) {
        return Err(DataError::Schema("missing header row".into()));
    }
    let find = |name: &str| {
        header
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| DataError::Schema(format!("missing column `{name}`")))
    };
    let id_col = find(&config.id_column)?;
    let t_col = find(&config.treatment_column)?;
    let e_col = find(&config.desire_column)?;
    let r_col = find(&config.response_column)?;
    let reserved = [id_col, t_col, e_col, r_col];
    let cov_cols: Vec<usize> = (0..header.len()).filter(|c| !reserved.contains(c)).collect();
    let names: Vec<String> = cov_cols.iter().map(|&c| header[c].to_string()).collect();
    let cardinalities = match &config.cardinalities {
        Some(c) => c.clone(),
        None => vec![2; names.len()],
    };
    let schema = CovariateSchema::new(names, cardinalities)?;

    let mut records = Vec::new();
    for (i, row) in csv.records().enumerate() {
        let row_no = i + 1;
        let row = row?;
        let field = |col: usize| -> Result<&str, DataError> {
            match row.get(col) {
                Some(v) if !v.is_empty() => Ok(v),
                _ => Err(DataError::Row {
                    row: row_no,
                    column: header[col].to_string(),
                    message: "missing value".into(),
                }),
            }
        };
        let binary = |col: usize| -> Result<bool, DataError> {
            match field(col)? {
                "0" => Ok(false),
                "1" => Ok(true),
                other => Err(DataError::Row {
                    row: row_no,
                    column: header[col].to_string(),
                    message: format!("expected 0 or 1, found `{other}`"),
                }),
            }
        };
        let mut covariates = Vec::with_capacity(cov_cols.len());
        for (j, &col) in cov_cols.iter().enumerate() {
            let raw = field(col)?;
            let level: u32 = raw.parse().map_err(|_| DataError::Row {
                row: row_no,
                column: header[col].to_string(),
                message: format!("expected a non-negative integer level, found `{raw}`"),
            })?;
            if level >= schema.cardinalities[j] {
                return Err(DataError::Row {
                    row: row_no,
                    column: header[col].to_string(),
                    message: format!(
                        "level {level} outside declared cardinality {}",
                        schema.cardinalities[j]
                    ),
                });
            }
            covariates.push(level);
        }
        records.push(TrialRecord {
            id: field(id_col)?.to_string(),
            treatment: binary(t_col)?,
            desire: binary(e_col)?,
            response: binary(r_col)?,
            covariates,
        });
    }
    Dataset::new(schema, records, target)
}

/// Writes the records as `id,T,E,R,<covariates...>`. The target is not part
/// of the CSV.
pub fn write_dataset<W: Write>(data: &Dataset, writer: W) -> Result<(), DataError> {
    let mut out = csv::Writer::from_writer(writer);
    let mut header = vec!["id".to_string(), "T".into(), "E".into(), "R".into()];
    header.extend(data.schema.names.iter().cloned());
    out.write_record(&header)?;
    for r in &data.records {
        let mut row = vec![
            r.id.clone(),
            u8::from(r.treatment).to_string(),
            u8::from(r.desire).to_string(),
            u8::from(r.response).to_string(),
        ];
        row.extend(r.covariates.iter().map(u32::to_string));
        out.write_record(&row)?;
    }
    out.flush()?;
    Ok(())
}

pub fn save_dataset(data: &Dataset, path: impl AsRef<Path>) -> Result<(), DataError> {
    write_dataset(data, File::create(path)?)
}

/// Additive per-level probability shift for one covariate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CovariateEffect {
    /// 0-based covariate index.
    pub covariate: usize,
    /// One shift per level of the covariate.
    pub shifts: Vec<f64>,
}

/// `P(E = 1) = base + sum of covariate shifts`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DesireModel {
    pub base: f64,
    #[serde(default)]
    pub covariate_effects: Vec<CovariateEffect>,
}

/// `P(R = 1) = base + T*treatment + E*desire + T*E*interaction + sum of
/// covariate shifts`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResponseModel {
    pub base: f64,
    #[serde(default)]
    pub treatment: f64,
    #[serde(default)]
    pub desire: f64,
    #[serde(default)]
    pub interaction: f64,
    #[serde(default)]
    pub covariate_effects: Vec<CovariateEffect>,
}

/// Generator settings for synthetic trials.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationConfig {
    pub n: usize,
    #[serde(default)]
    pub seed: u64,
    pub covariate_cardinalities: Vec<u32>,
    /// Optional labels; defaults to `H1..Hk`.
    #[serde(default)]
    pub covariate_names: Option<Vec<String>>,
    /// Optional per-covariate level probabilities; defaults to uniform.
    #[serde(default)]
    pub covariate_probabilities: Option<Vec<Vec<f64>>>,
    /// Probability of being randomized to treatment.
    #[serde(default = "half")]
    pub assignment_ratio: f64,
    pub desire_model: DesireModel,
    pub response_model: ResponseModel,
    /// Defaults to level 0 everywhere, desire 1, response 1.
    #[serde(default)]
    pub target: Option<TargetSpec>,
}

fn half() -> f64 {
    0.5
}

impl SimulationConfig {
    /// Fourteen binary background characteristics shaped like a student
    /// cohort (course, gender, age, ..., working student). Success depends
    /// on family education and prior statistics exposure, and the hint
    /// (treatment) raises it.
    pub fn student_cohort(n: usize) -> Self {
        let names = [
            "course",
            "gender",
            "age",
            "birthplace",
            "residence",
            "diploma_year",
            "diploma_place",
            "high_school",
            "diploma_grade",
            "first_registration",
            "statistics_background",
            "father_education",
            "mother_education",
            "working",
        ];
        Self {
            n,
            seed: 0,
            covariate_cardinalities: vec![2; names.len()],
            covariate_names: Some(names.iter().map(|s| s.to_string()).collect()),
            covariate_probabilities: None,
            assignment_ratio: 0.5,
            desire_model: DesireModel {
                base: 0.35,
                covariate_effects: vec![CovariateEffect { covariate: 10, shifts: vec![0.2, 0.0] }],
            },
            response_model: ResponseModel {
                base: 0.1,
                treatment: 0.25,
                desire: 0.0,
                interaction: 0.0,
                covariate_effects: vec![
                    CovariateEffect { covariate: 11, shifts: vec![0.0, 0.3] },
                    CovariateEffect { covariate: 12, shifts: vec![0.0, 0.1] },
                    CovariateEffect { covariate: 10, shifts: vec![0.0, 0.25] },
                ],
            },
            target: Some(TargetSpec {
                covariates: vec![0, 1, 1, 0, 0, 1, 0, 1, 1, 0, 0, 1, 1, 0],
                desire: true,
                response: true,
            }),
        }
    }

    fn k(&self) -> usize {
        self.covariate_cardinalities.len()
    }

    fn validate(&self) -> Result<CovariateSchema, ConfigError> {
        let bad = |msg: String| Err(ConfigError::Invalid(msg));
        let names = match &self.covariate_names {
            Some(names) => names.clone(),
            None => (1..=self.k()).map(|j| format!("H{j}")).collect(),
        };
        let schema = CovariateSchema::new(names, self.covariate_cardinalities.clone())?;
        if !is_probability(self.assignment_ratio) {
            return bad(format!("assignment_ratio {} outside [0, 1]", self.assignment_ratio));
        }
        if let Some(probs) = &self.covariate_probabilities {
            if probs.len() != self.k() {
                return bad(format!(
                    "covariate_probabilities has {} entries, expected {}",
                    probs.len(),
                    self.k()
                ));
            }
            for (j, p) in probs.iter().enumerate() {
                if p.len() != self.covariate_cardinalities[j] as usize {
                    return bad(format!("covariate {j}: expected one probability per level"));
                }
                if p.iter().any(|&v| !is_probability(v)) {
                    return bad(format!("covariate {j}: level probabilities outside [0, 1]"));
                }
                if (p.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
                    return bad(format!("covariate {j}: level probabilities do not sum to 1"));
                }
            }
        }
        let effects_range = |effects: &[CovariateEffect], what: &str| {
            let mut lo = 0.0;
            let mut hi = 0.0;
            let mut seen = HashSet::new();
            for e in effects {
                if e.covariate >= self.k() {
                    return Err(ConfigError::Invalid(format!(
                        "{what}: covariate index {} out of range",
                        e.covariate
                    )));
                }
                if !seen.insert(e.covariate) {
                    return Err(ConfigError::Invalid(format!(
                        "{what}: covariate {} listed twice",
                        e.covariate
                    )));
                }
                if e.shifts.len() != self.covariate_cardinalities[e.covariate] as usize {
                    return Err(ConfigError::Invalid(format!(
                        "{what}: covariate {} needs one shift per level",
                        e.covariate
                    )));
                }
                if e.shifts.iter().any(|s| !s.is_finite()) {
                    return Err(ConfigError::Invalid(format!("{what}: non-finite shift")));
                }
                lo += e.shifts.iter().cloned().fold(f64::INFINITY, f64::min);
                hi += e.shifts.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            }
            Ok((lo, hi))
        };
        let (lo, hi) = effects_range(&self.desire_model.covariate_effects, "desire_model")?;
        let d = self.desire_model.base;
        if !is_probability(d + lo) || !is_probability(d + hi) {
            return bad(format!(
                "desire_model probabilities span [{}, {}], outside [0, 1]",
                d + lo,
                d + hi
            ));
        }
        let (lo, hi) = effects_range(&self.response_model.covariate_effects, "response_model")?;
        let rm = &self.response_model;
        for (t, e) in [(0.0, 0.0), (0.0, 1.0), (1.0, 0.0), (1.0, 1.0)] {
            let p = rm.base + t * rm.treatment + e * rm.desire + t * e * rm.interaction;
            if !is_probability(p + lo) || !is_probability(p + hi) {
                return bad(format!(
                    "response_model probabilities for T={t}, E={e} span [{}, {}], outside [0, 1]",
                    p + lo,
                    p + hi
                ));
            }
        }
        Ok(schema)
    }
}

fn is_probability(p: f64) -> bool {
    (0.0..=1.0).contains(&p)
}

fn shift(effects: &[CovariateEffect], covariates: &[u32]) -> f64 {
    effects.iter().map(|e| e.shifts[covariates[e.covariate] as usize]).sum()
}

/// Draws a synthetic trial. Treatment is a Bernoulli(`assignment_ratio`)
/// draw independent of everything else; desire and response follow the
/// configured additive models. Identical `(config, seed)` give identical
/// datasets.
pub fn simulate_trial(config: &SimulationConfig, seed: u64) -> Result<Dataset, ConfigError> {
    let schema = config.validate()?;
    let k = config.k();
    let level_samplers: Vec<WeightedIndex<f64>> = (0..k)
        .map(|j| {
            let weights = match &config.covariate_probabilities {
                Some(p) => p[j].clone(),
                None => vec![1.0; config.covariate_cardinalities[j] as usize],
            };
            WeightedIndex::new(weights)
                .map_err(|e| ConfigError::Invalid(format!("covariate {j}: {e}")))
        })
        .collect::<Result<_, _>>()?;

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let width = config.n.max(1).to_string().len();
    let rm = &config.response_model;
    let mut records = Vec::with_capacity(config.n);
    for i in 0..config.n {
        let covariates: Vec<u32> =
            level_samplers.iter().map(|s| s.sample(&mut rng) as u32).collect();
        let p_desire = config.desire_model.base
            + shift(&config.desire_model.covariate_effects, &covariates);
        let desire = rng.random_bool(p_desire.clamp(0.0, 1.0));
        let treatment = rng.random_bool(config.assignment_ratio);
        let (t, e) = (f64::from(u8::from(treatment)), f64::from(u8::from(desire)));
        let p_response = rm.base
            + t * rm.treatment
            + e * rm.desire
            + t * e * rm.interaction
            + shift(&rm.covariate_effects, &covariates);
        let response = rng.random_bool(p_response.clamp(0.0, 1.0));
        records.push(TrialRecord {
            id: format!("s{:0width$}", i + 1),
            treatment,
            desire,
            response,
            covariates,
        });
    }
    let target = config.target.clone().unwrap_or_else(|| TargetSpec::new(vec![0; k]));
    Ok(Dataset::new(schema, records, target)?)
}
