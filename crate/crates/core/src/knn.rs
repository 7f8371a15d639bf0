//! Nearest-neighbor anomaly scoring and per-attribute timbre difference
//! labeling.
//!
//! The anomaly score is the mean distance to the `k` nearest normal training
//! embeddings. Each attribute is scored by where the test clip's metric falls
//! among the metrics of those same neighbors, counted as a normalized
//! Mann-Whitney U (ties count one half).

use alloc::string::String;
use alloc::vec::Vec;

use crate::embedding::{vector_distance, DistanceKind, Embedding, NormalizationStats};
use crate::error::{Error, Result};
use crate::label::{threshold_label, Label};
use crate::timbre::{TimbreAttribute, TimbreVector};

pub const DEFAULT_K: usize = 30;
pub const DEFAULT_THRESHOLD: f64 = 0.1;

/// Normal training clips in embedded and metric form.
#[derive(Debug, Clone, PartialEq)]
pub struct ReferenceSet {
    embeddings: Vec<Embedding>,
    timbre_vectors: Vec<TimbreVector>,
    clip_ids: Vec<String>,
    provider_id: String,
    distance_kind: DistanceKind,
    normalization: NormalizationStats,
}

impl ReferenceSet {
    pub fn new(
        embeddings: Vec<Embedding>,
        timbre_vectors: Vec<TimbreVector>,
        provider_id: impl Into<String>,
        distance_kind: DistanceKind,
        normalization: NormalizationStats,
    ) -> Result<Self> {
        let provider_id = provider_id.into();
        if embeddings.is_empty() {
            return Err(Error::NotEnoughData {
                needed: 1,
                actual: 0,
            });
        }
        if timbre_vectors.len() != embeddings.len() {
            return Err(Error::DimensionMismatch {
                expected: embeddings.len(),
                actual: timbre_vectors.len(),
            });
        }
        let dim = embeddings[0].dim();
        for e in &embeddings {
            if e.provider_id != provider_id {
                return Err(Error::ProviderMismatch {
                    expected: provider_id,
                    actual: e.provider_id.clone(),
                });
            }
            if e.dim() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    actual: e.dim(),
                });
            }
        }
        let clip_ids = embeddings.iter().map(|e| e.clip_id.clone()).collect();
        Ok(Self {
            embeddings,
            timbre_vectors,
            clip_ids,
            provider_id,
            distance_kind,
            normalization,
        })
    }

    pub fn len(&self) -> usize {
        self.embeddings.len()
    }

    pub fn is_empty(&self) -> bool {
        self.embeddings.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.embeddings[0].dim()
    }

    pub fn embeddings(&self) -> &[Embedding] {
        &self.embeddings
    }

    pub fn timbre_vectors(&self) -> &[TimbreVector] {
        &self.timbre_vectors
    }

    pub fn clip_ids(&self) -> &[String] {
        &self.clip_ids
    }

    pub fn provider_id(&self) -> &str {
        &self.provider_id
    }

    pub fn distance_kind(&self) -> DistanceKind {
        self.distance_kind
    }

    pub fn normalization(&self) -> &NormalizationStats {
        &self.normalization
    }

    /// Same data under a different distance.
    pub fn with_distance(mut self, kind: DistanceKind) -> Self {
        self.distance_kind = kind;
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NeighborHit {
    pub train_index: usize,
    pub distance: f64,
}

/// Scores and labels for one test clip.
#[derive(Debug, Clone, PartialEq)]
pub struct TimbreDiffResult {
    pub clip_id: String,
    pub anomaly_score: f64,
    pub attribute_scores: [f64; 5],
    pub attribute_labels: [Label; 5],
    pub neighbor_indices: Vec<usize>,
}

/// Per-attribute rank scores and their labels.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AttributeScores {
    pub scores: [f64; 5],
    pub labels: [Label; 5],
}

/// Exact brute-force k nearest neighbors, ascending by distance with ties
/// going to the lower training index.
pub fn knn(reference: &ReferenceSet, query: &Embedding, k: usize) -> Result<Vec<NeighborHit>> {
    if k == 0 {
        return Err(Error::InvalidParameter("k must be positive".into()));
    }
    if k > reference.len() {
        return Err(Error::KTooLarge {
            k,
            n: reference.len(),
        });
    }
    if query.provider_id != reference.provider_id {
        return Err(Error::ProviderMismatch {
            expected: reference.provider_id.clone(),
            actual: query.provider_id.clone(),
        });
    }
    if query.dim() != reference.dim() {
        return Err(Error::DimensionMismatch {
            expected: reference.dim(),
            actual: query.dim(),
        });
    }
    let mut hits: Vec<NeighborHit> = reference
        .embeddings
        .iter()
        .enumerate()
        .map(|(train_index, e)| NeighborHit {
            train_index,
            distance: vector_distance(&query.vector, &e.vector, reference.distance_kind),
        })
        .collect();
    hits.sort_by(|a, b| {
        a.distance
            .total_cmp(&b.distance)
            .then(a.train_index.cmp(&b.train_index))
    });
    hits.truncate(k);
    Ok(hits)
}

/// Mean neighbor distance.
pub fn anomaly_score(hits: &[NeighborHit]) -> Result<f64> {
    if hits.is_empty() {
        return Err(Error::NotEnoughData {
            needed: 1,
            actual: 0,
        });
    }
    Ok(hits.iter().map(|h| h.distance).sum::<f64>() / hits.len() as f64)
}

/// `U / k`, where each neighbor below the test value counts 1 and each
/// equal neighbor counts 0.5. Without ties this is `(r - 1) / k` for the
/// test value's rank `r` among itself and its neighbors.
pub fn timbre_rank_score(test_value: f64, neighbor_values: &[f64]) -> Result<f64> {
    if neighbor_values.is_empty() {
        return Err(Error::NotEnoughData {
            needed: 1,
            actual: 0,
        });
    }
    if !test_value.is_finite() || neighbor_values.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite);
    }
    // count in half units so the sum stays an exact integer
    let halves: u64 = neighbor_values
        .iter()
        .map(|&n| {
            if n < test_value {
                2
            } else if n == test_value {
                1
            } else {
                0
            }
        })
        .sum();
    Ok(halves as f64 / (2 * neighbor_values.len()) as f64)
}

fn attribute_scores<'a>(
    query: &TimbreVector,
    neighbors: impl Iterator<Item = &'a TimbreVector> + Clone,
    t: f64,
) -> Result<AttributeScores> {
    let mut scores = [0.0; 5];
    let mut labels = [Label::Unchanged; 5];
    let mut values = Vec::new();
    for attr in TimbreAttribute::ALL {
        values.clear();
        values.extend(neighbors.clone().map(|v| v.get(attr)));
        let score = timbre_rank_score(query.get(attr), &values)?;
        scores[attr.index()] = score;
        labels[attr.index()] = threshold_label(score, t)?;
    }
    Ok(AttributeScores { scores, labels })
}

/// Full inference for one clip: one neighbor search, the anomaly score, and
/// rank scores against the neighbors' raw timbre metrics.
pub fn score_clip(
    reference: &ReferenceSet,
    query_embedding: &Embedding,
    query_timbre: &TimbreVector,
    k: usize,
    t: f64,
) -> Result<TimbreDiffResult> {
    if !(0.0..0.5).contains(&t) {
        return Err(Error::InvalidThreshold(t));
    }
    let hits = knn(reference, query_embedding, k)?;
    let anomaly_score = anomaly_score(&hits)?;
    let neighbors = hits
        .iter()
        .map(|h| &reference.timbre_vectors[h.train_index]);
    let AttributeScores { scores, labels } = attribute_scores(query_timbre, neighbors, t)?;
    Ok(TimbreDiffResult {
        clip_id: query_embedding.clip_id.clone(),
        anomaly_score,
        attribute_scores: scores,
        attribute_labels: labels,
        neighbor_indices: hits.iter().map(|h| h.train_index).collect(),
    })
}

/// Baseline that ranks the query against every training clip instead of its
/// neighbors.
pub fn global_baseline_score(
    reference: &ReferenceSet,
    query_timbre: &TimbreVector,
    t: f64,
) -> Result<AttributeScores> {
    if !(0.0..0.5).contains(&t) {
        return Err(Error::InvalidThreshold(t));
    }
    attribute_scores(query_timbre, reference.timbre_vectors.iter(), t)
}
