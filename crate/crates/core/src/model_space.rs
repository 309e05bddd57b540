//! Priors over covariate subsets, exact posterior enumeration and a
//! Metropolis-Hastings sampler for when `2^k` is too many models to score.

use std::collections::HashMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataset::Dataset;
use crate::likelihood::BetaPrior;
use crate::partition::{GroupCounts, MatchIndex, ModelId};

pub const DEFAULT_EXHAUSTIVE_CAP: usize = 20;

#[derive(Debug, Error, PartialEq)]
pub enum SearchError {
    #[error("k = {k} gives 2^{k} models, above the exhaustive cap of k = {cap}; use the Metropolis-Hastings sampler instead")]
    CapExceeded { k: usize, cap: usize },
    #[error("invalid sampler settings: {0}")]
    InvalidMcmc(String),
    #[error("every model has zero prior mass")]
    NoSupport,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PriorKind {
    /// Equal mass on all `2^k` subsets.
    Uniform,
    /// Equal mass per subset size, restricted to at most `floor(k/2)`
    /// covariates.
    ChenChen,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelPrior {
    pub kind: PriorKind,
    pub k: usize,
}

impl ModelPrior {
    pub fn new(kind: PriorKind, k: usize) -> Self {
        Self { kind, k }
    }

    /// Unnormalized prior probability of `model`.
    ///
    /// Size-restricted weights do not sum to one over their support; the
    /// posterior is normalized afterwards, so this does not matter.
    pub fn weight(&self, model: ModelId) -> f64 {
        debug_assert!(model.fits(self.k));
        match self.kind {
            PriorKind::Uniform => 0.5f64.powi(self.k as i32),
            PriorKind::ChenChen => {
                let size = model.size();
                if size > self.k / 2 {
                    0.0
                } else {
                    1.0 / ((self.k + 1) as f64 * choose(self.k, size))
                }
            }
        }
    }

    /// Natural log of [`weight`](Self::weight); `-inf` outside the support.
    pub fn log_prior(&self, model: ModelId) -> f64 {
        match self.kind {
            PriorKind::Uniform => -(self.k as f64) * std::f64::consts::LN_2,
            PriorKind::ChenChen => self.weight(model).ln(),
        }
    }
}

pub fn log_prior(model: ModelId, prior: &ModelPrior) -> f64 {
    prior.log_prior(model)
}

fn choose(n: usize, k: usize) -> f64 {
    let k = k.min(n - k);
    let mut c: u128 = 1;
    for i in 0..k {
        c = c * (n - i) as u128 / (i + 1) as u128;
    }
    c as f64
}

/// Scores models against one dataset. Cheap to share across threads.
#[derive(Debug, Clone)]
pub struct ModelScorer {
    index: MatchIndex,
    prior: ModelPrior,
    beta: BetaPrior,
    target_response: bool,
}

impl ModelScorer {
    pub fn new(data: &Dataset, prior: PriorKind, beta: BetaPrior) -> Self {
        Self {
            index: MatchIndex::new(data),
            prior: ModelPrior::new(prior, data.k()),
            beta,
            target_response: data.target().response,
        }
    }

    pub fn k(&self) -> usize {
        self.prior.k
    }

    pub fn prior(&self) -> &ModelPrior {
        &self.prior
    }

    pub fn counts(&self, model: ModelId) -> GroupCounts {
        self.index.counts(model)
    }

    pub fn log_marginal(&self, model: ModelId) -> f64 {
        self.beta.log_marginal(&self.index.counts(model), self.target_response).log_value
    }

    /// `log(marginal * prior)`; `-inf` without computing the likelihood
    /// when the prior excludes the model.
    pub fn log_target(&self, model: ModelId) -> f64 {
        let lp = self.prior.log_prior(model);
        if lp == f64::NEG_INFINITY {
            lp
        } else {
            lp + self.log_marginal(model)
        }
    }

    fn entry(&self, model: ModelId) -> ScoredModel {
        let log_prior = self.prior.log_prior(model);
        let log_marginal = (log_prior > f64::NEG_INFINITY).then(|| self.log_marginal(model));
        ScoredModel { model, log_marginal, log_prior }
    }
}

/// A model with its unnormalized log score, before normalization.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScoredModel {
    pub model: ModelId,
    /// `None` when the prior excludes the model and the likelihood was
    /// never evaluated.
    pub log_marginal: Option<f64>,
    pub log_prior: f64,
}

impl ScoredModel {
    fn log_target(&self) -> f64 {
        match self.log_marginal {
            Some(lm) => lm + self.log_prior,
            None => f64::NEG_INFINITY,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PosteriorEntry {
    pub model: ModelId,
    pub log_marginal: Option<f64>,
    /// `null` in JSON when the model has zero prior mass.
    #[serde(serialize_with = "crate::json::finite_or_null", deserialize_with = "crate::json::null_as_neg_infinity")]
    pub log_prior: f64,
    pub posterior: f64,
}


/// Posterior probabilities over models, sorted by decreasing posterior with
/// ties broken by [`ModelId`] order.
#[derive(Debug, Clone, PartialEq)]
pub struct PosteriorTable {
    pub entries: Vec<PosteriorEntry>,
    /// `log Σ marginal·prior` over the support; `None` for sampled tables.
    pub log_normalizer: Option<f64>,
    /// Post-burn-in visits behind a sampled table.
    pub samples: Option<u64>,
}

impl PosteriorTable {
    /// Normalizes unnormalized scores with log-sum-exp.
    pub fn from_scores(scores: Vec<ScoredModel>) -> Result<Self, SearchError> {
        let max = scores.iter().map(ScoredModel::log_target).fold(f64::NEG_INFINITY, f64::max);
        if max == f64::NEG_INFINITY {
            return Err(SearchError::NoSupport);
        }
        let sum: f64 = scores.iter().map(|s| (s.log_target() - max).exp()).sum();
        let log_normalizer = max + sum.ln();
        let entries = scores
            .into_iter()
            .map(|s| PosteriorEntry {
                model: s.model,
                log_marginal: s.log_marginal,
                log_prior: s.log_prior,
                posterior: (s.log_target() - log_normalizer).exp(),
            })
            .collect();
        Ok(Self::sorted(entries, Some(log_normalizer), None))
    }

    fn sorted(
        mut entries: Vec<PosteriorEntry>,
        log_normalizer: Option<f64>,
        samples: Option<u64>,
    ) -> Self {
        entries.sort_by(|a, b| b.posterior.total_cmp(&a.posterior).then(a.model.cmp(&b.model)));
        Self { entries, log_normalizer, samples }
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn best(&self) -> Option<&PosteriorEntry> {
        self.entries.first()
    }

    pub fn posterior_of(&self, model: ModelId) -> f64 {
        self.entries.iter().find(|e| e.model == model).map_or(0.0, |e| e.posterior)
    }

    /// Entries with positive posterior.
    pub fn support_size(&self) -> usize {
        self.entries.iter().filter(|e| e.posterior > 0.0).count()
    }

    /// Half the L1 distance between the two posteriors; models missing
    /// from a table count as probability zero.
    pub fn total_variation(&self, other: &PosteriorTable) -> f64 {
        let mut diff: HashMap<ModelId, f64> = HashMap::new();
        for e in &self.entries {
            *diff.entry(e.model).or_default() += e.posterior;
        }
        for e in &other.entries {
            *diff.entry(e.model).or_default() -= e.posterior;
        }
        0.5 * diff.values().map(|d| d.abs()).sum::<f64>()
    }
}

/// The first `m` entries in table order.
pub fn top_models(table: &PosteriorTable, m: usize) -> &[PosteriorEntry] {
    &table.entries[..m.min(table.entries.len())]
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SearchOptions {
    pub beta_prior: BetaPrior,
    pub exhaustive_cap: usize,
}

impl Default for SearchOptions {
    fn default() -> Self {
        Self { beta_prior: BetaPrior::UNIFORM, exhaustive_cap: DEFAULT_EXHAUSTIVE_CAP }
    }
}

/// Scores all `2^k` models. Models with zero prior mass stay in the table
/// with probability 0 and no likelihood.
pub fn enumerate_posterior(
    data: &Dataset,
    prior: PriorKind,
    options: &SearchOptions,
) -> Result<PosteriorTable, SearchError> {
    let k = data.k();
    if k > options.exhaustive_cap {
        return Err(SearchError::CapExceeded { k, cap: options.exhaustive_cap });
    }
    let scorer = ModelScorer::new(data, prior, options.beta_prior);
    let scores: Vec<ScoredModel> = (0..1u64 << k)
        .into_par_iter()
        .map(|mask| scorer.entry(ModelId::from_mask(mask)))
        .collect();
    PosteriorTable::from_scores(scores)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct McmcConfig {
    /// Steps per chain, burn-in included.
    pub iterations: u64,
    pub burn_in: u64,
    pub seed: u64,
    pub chains: usize,
}

impl McmcConfig {
    /// One chain with a 10% burn-in.
    pub fn new(iterations: u64, seed: u64) -> Self {
        Self { iterations, burn_in: iterations / 10, seed, chains: 1 }
    }

    pub fn with_chains(mut self, chains: usize) -> Self {
        self.chains = chains;
        self
    }

    pub fn validate(&self) -> Result<(), SearchError> {
        if self.iterations <= self.burn_in {
            return Err(SearchError::InvalidMcmc(format!(
                "iterations ({}) must exceed burn-in ({})",
                self.iterations, self.burn_in
            )));
        }
        if self.chains == 0 {
            return Err(SearchError::InvalidMcmc("at least one chain is required".into()));
        }
        Ok(())
    }
}

/// One proposal of the chain and whether it was accepted.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Transition {
    pub from: ModelId,
    pub proposed: ModelId,
    pub accepted: bool,
}

impl Transition {
    pub fn to(&self) -> ModelId {
        if self.accepted {
            self.proposed
        } else {
            self.from
        }
    }
}

/// Metropolis-Hastings chain over subsets with a single-coordinate flip
/// proposal. The proposal is symmetric, so acceptance only compares
/// `marginal * prior` at the two models.
#[derive(Debug, Clone)]
pub struct ChainState<'a> {
    scorer: &'a ModelScorer,
    current: ModelId,
    log_target: f64,
    rng: ChaCha8Rng,
    rng_seed: u64,
    memo: HashMap<ModelId, f64>,
    history: HashMap<ModelId, u64>,
    accepted: u64,
    proposed: u64,
}

impl<'a> ChainState<'a> {
    /// Starts at the empty model. `stream` separates chains sharing a seed.
    pub fn new(scorer: &'a ModelScorer, seed: u64, stream: u64) -> Result<Self, SearchError> {
        let current = ModelId::EMPTY;
        let log_target = scorer.log_target(current);
        if log_target == f64::NEG_INFINITY {
            return Err(SearchError::NoSupport);
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(stream);
        let mut memo = HashMap::new();
        memo.insert(current, log_target);
        Ok(Self {
            scorer,
            current,
            log_target,
            rng,
            rng_seed: seed,
            memo,
            history: HashMap::new(),
            accepted: 0,
            proposed: 0,
        })
    }

    pub fn current(&self) -> ModelId {
        self.current
    }

    pub fn log_target(&self) -> f64 {
        self.log_target
    }

    pub fn rng_seed(&self) -> u64 {
        self.rng_seed
    }

    pub fn history(&self) -> &HashMap<ModelId, u64> {
        &self.history
    }

    pub fn acceptance_rate(&self) -> f64 {
        if self.proposed == 0 {
            0.0
        } else {
            self.accepted as f64 / self.proposed as f64
        }
    }

    fn score(&mut self, model: ModelId) -> f64 {
        let scorer = self.scorer;
        *self.memo.entry(model).or_insert_with(|| scorer.log_target(model))
    }

    pub fn step(&mut self) -> Transition {
        let j = self.rng.random_range(0..self.scorer.k());
        let proposed = self.current.flip(j);
        let candidate = self.score(proposed);
        let log_ratio = candidate - self.log_target;
        // Always draw, so the random stream does not depend on the branch.
        let u: f64 = self.rng.random();
        let accepted = candidate > f64::NEG_INFINITY && (log_ratio >= 0.0 || u < log_ratio.exp());
        let from = self.current;
        self.proposed += 1;
        if accepted {
            self.accepted += 1;
            self.current = proposed;
            self.log_target = candidate;
        }
        debug_assert_eq!(self.log_target, self.scorer.log_target(self.current));
        Transition { from, proposed, accepted }
    }

    /// Runs `iterations` steps and records the visited state after each
    /// step past `burn_in`.
    pub fn run(&mut self, iterations: u64, burn_in: u64) {
        for i in 0..iterations {
            self.step();
            if i >= burn_in {
                *self.history.entry(self.current).or_default() += 1;
            }
        }
    }
}

/// Empirical posterior from `config.chains` independent chains, merged
/// after burn-in. Chain `c` uses the seed with random stream `c`, so the
/// result is reproducible regardless of thread scheduling.
pub fn mh_sample(
    data: &Dataset,
    prior: PriorKind,
    config: &McmcConfig,
    beta: BetaPrior,
) -> Result<PosteriorTable, SearchError> {
    config.validate()?;
    let scorer = ModelScorer::new(data, prior, beta);
    let histories: Vec<HashMap<ModelId, u64>> = (0..config.chains as u64)
        .into_par_iter()
        .map(|c| {
            let mut chain = ChainState::new(&scorer, config.seed, c)?;
            chain.run(config.iterations, config.burn_in);
            Ok(chain.history)
        })
        .collect::<Result<_, SearchError>>()?;

    let mut visits: HashMap<ModelId, u64> = HashMap::new();
    for history in histories {
        for (model, count) in history {
            *visits.entry(model).or_default() += count;
        }
    }
    let total: u64 = visits.values().sum();
    let entries = visits
        .into_iter()
        .map(|(model, count)| {
            let scored = scorer.entry(model);
            PosteriorEntry {
                model,
                log_marginal: scored.log_marginal,
                log_prior: scored.log_prior,
                posterior: count as f64 / total as f64,
            }
        })
        .collect();
    Ok(PosteriorTable::sorted(entries, None, Some(total)))
}
