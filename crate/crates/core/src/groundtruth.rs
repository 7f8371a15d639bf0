//! Dataset manifests and ground-truth timbre difference labels.
//!
//! For every (condition, anomaly cause) group the anomalous clips' metric
//! values are compared with the normal training clips of the same condition
//! by AUC; thresholding that AUC gives one label vector per group, which is
//! then shared by every anomalous clip of the group.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use crate::error::{Error, Result};
use crate::label::{threshold_label, Label};
use crate::timbre::{TimbreAttribute, TimbreVector};

pub const DEFAULT_T_PRIME: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "lowercase"))]
pub enum Split {
    Train,
    Test,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "lowercase"))]
pub enum State {
    Normal,
    Anomalous,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "lowercase"))]
pub enum Domain {
    #[default]
    Source,
    Target,
}

/// One row of a dataset manifest.
#[derive(Debug, Clone, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ManifestEntry {
    pub clip_id: String,
    pub path: String,
    pub split: Split,
    pub state: State,
    pub condition: String,
    /// Empty for normal clips.
    pub cause: String,
    pub domain: Domain,
}

impl ManifestEntry {
    pub fn is_train(&self) -> bool {
        self.split == Split::Train
    }

    pub fn is_test(&self) -> bool {
        self.split == Split::Test
    }

    pub fn is_anomalous(&self) -> bool {
        self.state == State::Anomalous
    }
}

/// Check manifest invariants; errors name the 1-based data row.
pub fn validate_manifest(entries: &[ManifestEntry]) -> Result<()> {
    let mut seen = BTreeMap::new();
    for (i, e) in entries.iter().enumerate() {
        let row = i + 1;
        if e.clip_id.is_empty() {
            return Err(Error::InvalidManifest(format!("row {row}: empty clip_id")));
        }
        if let Some(first) = seen.insert(e.clip_id.as_str(), row) {
            return Err(Error::InvalidManifest(format!(
                "row {row}: duplicate clip_id `{}` (first seen in row {first})",
                e.clip_id
            )));
        }
        if e.split == Split::Train && e.state == State::Anomalous {
            return Err(Error::InvalidManifest(format!(
                "row {row}: training clip `{}` is anomalous; training data must be normal",
                e.clip_id
            )));
        }
        if e.state == State::Anomalous && e.cause.is_empty() {
            return Err(Error::InvalidManifest(format!(
                "row {row}: anomalous clip `{}` has no cause",
                e.clip_id
            )));
        }
    }
    Ok(())
}

/// AUC with `negative` as negatives and `positive` as positives: the share
/// of (negative, positive) pairs where the positive is larger, ties counting
/// one half. Computed from midranks in `O(n log n)`.
pub fn auc(negative: &[f64], positive: &[f64]) -> Result<f64> {
    if negative.is_empty() || positive.is_empty() {
        return Err(Error::NotEnoughData {
            needed: 1,
            actual: 0,
        });
    }
    if negative.iter().chain(positive).any(|v| !v.is_finite()) {
        return Err(Error::NonFinite);
    }
    let mut pooled: Vec<(f64, bool)> = negative
        .iter()
        .map(|&v| (v, false))
        .chain(positive.iter().map(|&v| (v, true)))
        .collect();
    pooled.sort_by(|a, b| a.0.total_cmp(&b.0));
    // twice the positive rank sum; midranks of tie blocks are half-integers
    let mut rank_sum2: u64 = 0;
    let mut i = 0;
    while i < pooled.len() {
        let mut j = i;
        while j + 1 < pooled.len() && pooled[j + 1].0 == pooled[i].0 {
            j += 1;
        }
        // 1-based ranks i+1..=j+1 share the midrank (i + j + 2) / 2
        let midrank2 = (i + j + 2) as u64;
        let positives = pooled[i..=j].iter().filter(|p| p.1).count() as u64;
        rank_sum2 += midrank2 * positives;
        i = j + 1;
    }
    let (n_neg, n_pos) = (negative.len() as u64, positive.len() as u64);
    let u2 = rank_sum2 - n_pos * (n_pos + 1);
    Ok(u2 as f64 / (2 * n_neg * n_pos) as f64)
}

/// Ground-truth scores and labels of one (condition, cause) group.
#[derive(Debug, Clone, PartialEq)]
pub struct GroundTruthRecord {
    pub condition: String,
    pub cause: String,
    pub scores: [f64; 5],
    pub labels: [Label; 5],
}

/// Label every (condition, cause) group present among the anomalous clips.
/// Records come out sorted by condition, then cause.
pub fn generate_ground_truth(
    entries: &[ManifestEntry],
    timbre: &BTreeMap<String, TimbreVector>,
    t_prime: f64,
) -> Result<Vec<GroundTruthRecord>> {
    if !(0.0..0.5).contains(&t_prime) {
        return Err(Error::InvalidThreshold(t_prime));
    }
    let lookup = |id: &String| {
        timbre
            .get(id)
            .ok_or_else(|| Error::MissingTimbre(id.clone()))
    };
    let mut normals: BTreeMap<&str, Vec<&TimbreVector>> = BTreeMap::new();
    let mut groups: BTreeMap<(&str, &str), Vec<&TimbreVector>> = BTreeMap::new();
    for e in entries {
        match (e.split, e.state) {
            (Split::Train, State::Normal) => normals
                .entry(&e.condition)
                .or_default()
                .push(lookup(&e.clip_id)?),
            (_, State::Anomalous) => groups
                .entry((&e.condition, &e.cause))
                .or_default()
                .push(lookup(&e.clip_id)?),
            _ => {}
        }
    }
    let mut records = Vec::with_capacity(groups.len());
    for ((condition, cause), anomalous) in groups {
        let normal = normals
            .get(condition)
            .ok_or_else(|| Error::NoNormalTraining(condition.into()))?;
        let mut scores = [0.0; 5];
        let mut labels = [Label::Unchanged; 5];
        for attr in TimbreAttribute::ALL {
            // sorted inputs make the result independent of manifest order
            let mut neg: Vec<f64> = normal.iter().map(|v| v.get(attr)).collect();
            let mut pos: Vec<f64> = anomalous.iter().map(|v| v.get(attr)).collect();
            neg.sort_by(f64::total_cmp);
            pos.sort_by(f64::total_cmp);
            let score = auc(&neg, &pos)?;
            scores[attr.index()] = score;
            labels[attr.index()] = threshold_label(score, t_prime)?;
        }
        records.push(GroundTruthRecord {
            condition: condition.into(),
            cause: cause.into(),
            scores,
            labels,
        });
    }
    Ok(records)
}

/// Give every anomalous test clip the label vector of its group.
pub fn assign_labels(
    entries: &[ManifestEntry],
    records: &[GroundTruthRecord],
) -> Result<BTreeMap<String, [Label; 5]>> {
    let by_group: BTreeMap<(&str, &str), &GroundTruthRecord> = records
        .iter()
        .map(|r| ((r.condition.as_str(), r.cause.as_str()), r))
        .collect();
    let mut out = BTreeMap::new();
    for e in entries.iter().filter(|e| e.is_test() && e.is_anomalous()) {
        let record = by_group
            .get(&(e.condition.as_str(), e.cause.as_str()))
            .ok_or_else(|| Error::MissingRecord {
                clip_id: e.clip_id.clone(),
                condition: e.condition.clone(),
                cause: e.cause.clone(),
            })?;
        out.insert(e.clip_id.clone(), record.labels);
    }
    Ok(out)
}

/// Label counts in `[-1, 0, 1]` order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct LabelCounts {
    pub minus: usize,
    pub zero: usize,
    pub plus: usize,
}

impl LabelCounts {
    pub fn add(&mut self, label: Label) {
        match label {
            Label::Decreased => self.minus += 1,
            Label::Unchanged => self.zero += 1,
            Label::Increased => self.plus += 1,
        }
    }

    pub fn get(&self, label: Label) -> usize {
        match label {
            Label::Decreased => self.minus,
            Label::Unchanged => self.zero,
            Label::Increased => self.plus,
        }
    }

    pub fn total(&self) -> usize {
        self.minus + self.zero + self.plus
    }
}

impl fmt::Display for LabelCounts {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}/{}", self.minus, self.zero, self.plus)
    }
}

/// Group count, distinct label vectors and label value counts.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct GroundTruthStats {
    pub groups: usize,
    pub unique_vectors: usize,
    pub counts: LabelCounts,
}

pub fn ground_truth_statistics(records: &[GroundTruthRecord]) -> GroundTruthStats {
    let unique: BTreeSet<[Label; 5]> = records.iter().map(|r| r.labels).collect();
    let mut counts = LabelCounts::default();
    for label in records.iter().flat_map(|r| r.labels) {
        counts.add(label);
    }
    GroundTruthStats {
        groups: records.len(),
        unique_vectors: unique.len(),
        counts,
    }
}
