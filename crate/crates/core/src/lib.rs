//! Unsupervised anomalous sound detection with timbre difference labels.
//!
//! Normal training clips are embedded and kept as a reference set. A test
//! clip is scored by its mean distance to the `k` nearest normal embeddings,
//! and each timbre attribute is labeled increased, unchanged or decreased by
//! ranking the clip's metric among those same neighbors.
//!
//! The crate is `no_std` and only needs `alloc`; file formats and the command
//! line live in the `timbrediff` crate.
#![no_std]

extern crate alloc;

pub mod embedding;
pub mod error;
pub mod eval;
pub mod fft;
pub mod groundtruth;
pub mod knn;
pub mod label;
pub mod signal;
pub mod synth;
pub mod timbre;

pub use embedding::{DistanceKind, Embedding, NormalizationStats, Provider};
pub use error::{Error, Result};
pub use eval::{build_report, EvalReport};
pub use groundtruth::{GroundTruthRecord, ManifestEntry};
pub use knn::{ReferenceSet, TimbreDiffResult};
pub use label::Label;
pub use signal::AudioClip;
pub use timbre::{compute_timbre_vector, TimbreAttribute, TimbreVector};
