//! Fitted reference sets on disk.
//!
//! A model directory holds `config.json`, `embeddings.tdce` with its id
//! sidecar, `timbre.csv` and `normalization.json`.

use std::fs;
use std::path::Path;
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};
use timbrediff_core::{DistanceKind, NormalizationStats, ReferenceSet};

use crate::error::{Error, Result};
use crate::formats::{read_json, read_timbre, write_json, write_timbre, Precision};
use crate::tdce::{read_embeddings, write_embeddings};

pub const CONFIG_FILE: &str = "config.json";
pub const EMBEDDINGS_FILE: &str = "embeddings.tdce";
pub const TIMBRE_FILE: &str = "timbre.csv";
pub const NORMALIZATION_FILE: &str = "normalization.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub provider_id: String,
    pub distance_kind: DistanceKind,
    pub k: usize,
    pub t: f64,
    pub dim: usize,
    pub n_train: usize,
    pub created_unix: u64,
    pub tool_version: String,
}

/// A reference set with its default scoring parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct Model {
    pub reference: ReferenceSet,
    pub k: usize,
    pub t: f64,
}

pub fn save_model(dir: &Path, model: &Model) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let r = &model.reference;
    let config = ModelConfig {
        provider_id: r.provider_id().to_string(),
        distance_kind: r.distance_kind(),
        k: model.k,
        t: model.t,
        dim: r.dim(),
        n_train: r.len(),
        created_unix: SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .map_or(0, |d| d.as_secs()),
        tool_version: env!("CARGO_PKG_VERSION").to_string(),
    };
    write_embeddings(&dir.join(EMBEDDINGS_FILE), r.embeddings())?;
    let timbre: Vec<_> = r
        .clip_ids()
        .iter()
        .cloned()
        .zip(r.timbre_vectors().iter().copied())
        .collect();
    write_timbre(&dir.join(TIMBRE_FILE), &timbre, Precision::Lossless)?;
    write_json(&dir.join(NORMALIZATION_FILE), r.normalization())?;
    // config last: its presence marks a complete directory
    write_json(&dir.join(CONFIG_FILE), &config)
}

pub fn load_model(dir: &Path) -> Result<Model> {
    let config_path = dir.join(CONFIG_FILE);
    let config: ModelConfig = read_json(&config_path)?;
    let embeddings = read_embeddings(&dir.join(EMBEDDINGS_FILE), &config.provider_id)?;
    let timbre_path = dir.join(TIMBRE_FILE);
    let timbre = read_timbre(&timbre_path)?;
    if timbre.len() != embeddings.len() {
        return Err(Error::format(
            &timbre_path,
            format!("{} rows for {} embeddings", timbre.len(), embeddings.len()),
        ));
    }
    for (i, ((id, _), e)) in timbre.iter().zip(&embeddings).enumerate() {
        if *id != e.clip_id {
            return Err(Error::format(
                &timbre_path,
                format!(
                    "row {}: clip `{id}` but embedding row is `{}`",
                    i + 1,
                    e.clip_id
                ),
            ));
        }
    }
    let raw: NormalizationStats = read_json(&dir.join(NORMALIZATION_FILE))?;
    let normalization = NormalizationStats::new(raw.mean, raw.std)?;
    let reference = ReferenceSet::new(
        embeddings,
        timbre.into_iter().map(|(_, v)| v).collect(),
        config.provider_id.clone(),
        config.distance_kind,
        normalization,
    )?;
    if reference.dim() != config.dim {
        return Err(Error::format(
            &config_path,
            format!("dim {} but embeddings have {}", config.dim, reference.dim()),
        ));
    }
    Ok(Model {
        reference,
        k: config.k,
        t: config.t,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use timbrediff_core::{Embedding, TimbreVector};

    #[test]
    fn save_load_is_lossless() {
        let dir = tempfile::tempdir().unwrap();
        let embeddings = (0..4)
            .map(|i| {
                Embedding::new(
                    vec![i as f32 * 0.1, 1.0 / (i as f32 + 3.0)],
                    "spectral",
                    format!("c{i}"),
                )
                .unwrap()
            })
            .collect();
        let timbre = (0..4)
            .map(|i| TimbreVector::new([1.0 / (i as f64 + 7.0), 0.1, 0.2, 1e3 / 3.0, 0.3]).unwrap())
            .collect();
        let norm = NormalizationStats::new(vec![0.1 / 3.0, 2.0], vec![1.0 / 7.0, 3.0]).unwrap();
        let reference =
            ReferenceSet::new(embeddings, timbre, "spectral", DistanceKind::Cosine, norm).unwrap();
        let model = Model {
            reference,
            k: 3,
            t: 0.1,
        };
        save_model(dir.path(), &model).unwrap();
        assert_eq!(load_model(dir.path()).unwrap(), model);
        let config: serde_json::Value =
            serde_json::from_str(&fs::read_to_string(dir.path().join(CONFIG_FILE)).unwrap())
                .unwrap();
        assert_eq!(config["distance_kind"], "cosine");
        assert_eq!(config["provider_id"], "spectral");
    }

    #[test]
    fn missing_directory_errors() {
        let dir = tempfile::tempdir().unwrap();
        assert!(load_model(&dir.path().join("absent")).is_err());
    }
}
