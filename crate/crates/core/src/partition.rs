//! Five-way split of a trial relative to the target individual.
//!
//! A model is the set of covariates on which subjects must agree with the
//! target. Treated subjects split into the comparable stratum (same desire
//! as the target, matching on the model's covariates) and everybody else;
//! untreated subjects split into matching-and-desiring, matching-and-not-
//! desiring, and non-matching.

use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::dataset::{Dataset, MAX_COVARIATES};

/// A subset of covariate indices (0-based), stored as an inclusion mask.
///
/// Ordering is lexicographic on the sorted index list, so `[] < [0] <
/// [0, 1] < [1]`.
#[derive(Clone, Copy, PartialEq, Eq, Hash, Default)]
pub struct ModelId(u64);

impl ModelId {
    pub const EMPTY: ModelId = ModelId(0);

    pub fn from_mask(mask: u64) -> Self {
        ModelId(mask)
    }

    /// Panics if an index is `>= 64`.
    pub fn from_indices<I: IntoIterator<Item = usize>>(indices: I) -> Self {
        let mut mask = 0u64;
        for j in indices {
            assert!(j < MAX_COVARIATES, "covariate index {j} out of range");
            mask |= 1 << j;
        }
        ModelId(mask)
    }

    /// All covariates `0..k`.
    pub fn full(k: usize) -> Self {
        assert!(k <= MAX_COVARIATES);
        if k == MAX_COVARIATES {
            ModelId(u64::MAX)
        } else {
            ModelId((1u64 << k) - 1)
        }
    }

    pub fn mask(self) -> u64 {
        self.0
    }

    pub fn size(self) -> usize {
        self.0.count_ones() as usize
    }

    pub fn contains(self, j: usize) -> bool {
        j < MAX_COVARIATES && self.0 & (1 << j) != 0
    }

    /// Toggles membership of covariate `j`.
    pub fn flip(self, j: usize) -> Self {
        ModelId(self.0 ^ (1 << j))
    }

    pub fn is_subset_of(self, other: ModelId) -> bool {
        self.0 & !other.0 == 0
    }

    /// True when every index is below `k`.
    pub fn fits(self, k: usize) -> bool {
        k >= MAX_COVARIATES || self.0 >> k == 0
    }

    pub fn indices(self) -> impl Iterator<Item = usize> {
        let mut rest = self.0;
        std::iter::from_fn(move || {
            if rest == 0 {
                None
            } else {
                let j = rest.trailing_zeros() as usize;
                rest &= rest - 1;
                Some(j)
            }
        })
    }
}

impl Ord for ModelId {
    fn cmp(&self, other: &Self) -> Ordering {
        let diff = self.0 ^ other.0;
        if diff == 0 {
            return Ordering::Equal;
        }
        // Both lists agree below the first differing index `i`. The side
        // holding `i` is smaller unless the other list ends there.
        let i = diff.trailing_zeros();
        let above = if i == 63 { 0 } else { u64::MAX << (i + 1) };
        if self.0 & (1 << i) != 0 {
            if other.0 & above != 0 {
                Ordering::Less
            } else {
                Ordering::Greater
            }
        } else if self.0 & above != 0 {
            Ordering::Greater
        } else {
            Ordering::Less
        }
    }
}

impl PartialOrd for ModelId {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Debug for ModelId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self}")
    }
}

impl fmt::Display for ModelId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("{")?;
        for (i, j) in self.indices().enumerate() {
            if i > 0 {
                f.write_str(",")?;
            }
            write!(f, "{j}")?;
        }
        f.write_str("}")
    }
}

impl Serialize for ModelId {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_seq(self.indices())
    }
}

impl<'de> Deserialize<'de> for ModelId {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let indices = Vec::<usize>::deserialize(d)?;
        let mut mask = 0u64;
        for j in indices {
            if j >= MAX_COVARIATES {
                return Err(serde::de::Error::custom(format!("covariate index {j} out of range")));
            }
            if mask & (1 << j) != 0 {
                return Err(serde::de::Error::custom(format!("duplicate covariate index {j}")));
            }
            mask |= 1 << j;
        }
        Ok(ModelId(mask))
    }
}

/// Size and number of successes of one group.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
pub struct Tally {
    pub n: u64,
    pub x: u64,
}

impl Tally {
    pub fn new(n: u64, x: u64) -> Self {
        assert!(x <= n, "successes {x} exceed group size {n}");
        Tally { n, x }
    }

    fn push(&mut self, response: bool) {
        self.n += 1;
        self.x += u64::from(response);
    }

    /// Pools two tallies.
    pub fn merge(self, other: Tally) -> Tally {
        Tally { n: self.n + other.n, x: self.x + other.x }
    }

    /// `x / n`, or `None` for an empty group.
    pub fn ratio(self) -> Option<f64> {
        (self.n > 0).then(|| self.x as f64 / self.n as f64)
    }
}

/// Tallies of the five groups induced by a model.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
pub struct GroupCounts {
    /// Treated, same desire as the target, matching on the model.
    pub a11: Tally,
    /// Remaining treated.
    pub abar11: Tally,
    /// Untreated, desired treatment, matching.
    pub a01: Tally,
    /// Untreated, did not desire treatment, matching.
    pub a00: Tally,
    /// Untreated, not matching.
    pub abar0: Tally,
}

impl GroupCounts {
    /// Matching untreated subjects regardless of desire.
    pub fn a0(&self) -> Tally {
        self.a00.merge(self.a01)
    }

    pub fn treated(&self) -> u64 {
        self.a11.n + self.abar11.n
    }

    pub fn untreated(&self) -> u64 {
        self.a01.n + self.a00.n + self.abar0.n
    }

    pub fn total(&self) -> u64 {
        self.treated() + self.untreated()
    }
}

/// Splits `data` into the five groups under `model`.
///
/// Panics if `model` refers to covariates beyond the schema.
pub fn partition_counts(data: &Dataset, model: ModelId) -> GroupCounts {
    assert!(model.fits(data.k()), "model {model} invalid for k = {}", data.k());
    let target = data.target();
    let mut counts = GroupCounts::default();
    for r in data.records() {
        let matches = model.indices().all(|j| r.covariates[j] == target.covariates[j]);
        let group = match (r.treatment, matches) {
            (true, true) if r.desire == target.desire => &mut counts.a11,
            (true, _) => &mut counts.abar11,
            (false, true) if r.desire => &mut counts.a01,
            (false, true) => &mut counts.a00,
            (false, false) => &mut counts.abar0,
        };
        group.push(r.response);
    }
    counts
}

/// Pre-aggregated view of a dataset for fast repeated partitioning.
///
/// Records are bucketed by the set of covariates on which they differ from
/// the target; a model matches a bucket when the two sets are disjoint.
#[derive(Debug, Clone)]
pub struct MatchIndex {
    k: usize,
    buckets: Vec<Bucket>,
}

#[derive(Debug, Clone, Default)]
struct Bucket {
    mismatch: u64,
    /// Treated subjects whose desire equals the target's.
    treated_same_desire: Tally,
    treated_other_desire: Tally,
    untreated_desire: Tally,
    untreated_no_desire: Tally,
}

impl MatchIndex {
    pub fn new(data: &Dataset) -> Self {
        let target = data.target();
        let mut buckets: BTreeMap<u64, Bucket> = BTreeMap::new();
        for r in data.records() {
            let mismatch = r
                .covariates
                .iter()
                .zip(&target.covariates)
                .enumerate()
                .filter(|(_, (a, b))| a != b)
                .fold(0u64, |m, (j, _)| m | (1 << j));
            let bucket = buckets
                .entry(mismatch)
                .or_insert_with(|| Bucket { mismatch, ..Default::default() });
            let tally = match (r.treatment, r.desire) {
                (true, e) if e == target.desire => &mut bucket.treated_same_desire,
                (true, _) => &mut bucket.treated_other_desire,
                (false, true) => &mut bucket.untreated_desire,
                (false, false) => &mut bucket.untreated_no_desire,
            };
            tally.push(r.response);
        }
        Self { k: data.k(), buckets: buckets.into_values().collect() }
    }

    pub fn k(&self) -> usize {
        self.k
    }

    /// Same result as [`partition_counts`], in time proportional to the
    /// number of distinct mismatch patterns.
    pub fn counts(&self, model: ModelId) -> GroupCounts {
        assert!(model.fits(self.k), "model {model} invalid for k = {}", self.k);
        let mut c = GroupCounts::default();
        for b in &self.buckets {
            c.abar11 = c.abar11.merge(b.treated_other_desire);
            if b.mismatch & model.mask() == 0 {
                c.a11 = c.a11.merge(b.treated_same_desire);
                c.a01 = c.a01.merge(b.untreated_desire);
                c.a00 = c.a00.merge(b.untreated_no_desire);
            } else {
                c.abar11 = c.abar11.merge(b.treated_same_desire);
                c.abar0 = c.abar0.merge(b.untreated_desire).merge(b.untreated_no_desire);
            }
        }
        c
    }
}

/// Success ratio of the comparable treated group, and the ratio between the
/// success ratios of matching untreated subjects with and without desire.
/// A value of `None` marks a zero denominator.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SufficiencyDiagnostics {
    pub treated_ratio: Option<f64>,
    pub untreated_e_ratio: Option<f64>,
}

pub fn sufficiency_diagnostics(counts: &GroupCounts) -> SufficiencyDiagnostics {
    let untreated_e_ratio = match (counts.a01.ratio(), counts.a00.ratio()) {
        (Some(desire), Some(no_desire)) if no_desire > 0.0 => Some(desire / no_desire),
        _ => None,
    };
    SufficiencyDiagnostics { treated_ratio: counts.a11.ratio(), untreated_e_ratio }
}
