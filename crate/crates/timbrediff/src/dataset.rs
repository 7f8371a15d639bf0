//! Writing synthetic benchmark datasets to disk.

use std::path::Path;

use rayon::prelude::*;
use timbrediff_core::synth::{
    default_benchmark_specs, plan_dataset, ConditionSpec, DatasetSpec, DEFAULT_CLIP_SECONDS,
};
use timbrediff_core::ManifestEntry;

use crate::error::{Error, Result};
use crate::formats::{write_json, write_manifest};
use crate::wav::{save_wav, WavEncoding};

pub const MANIFEST_FILE: &str = "manifest.csv";
pub const SPECS_FILE: &str = "specs.json";

/// Benchmark overrides; `None` keeps the default.
#[derive(Debug, Clone, Default)]
pub struct BenchmarkOptions {
    pub conditions: Option<usize>,
    pub causes: Option<Vec<String>>,
    pub train_per_condition: Option<usize>,
    pub test_per_condition: Option<usize>,
    pub clip_seconds: Option<f64>,
}

/// The default conditions, extended with generated ones when more are asked for.
pub fn benchmark_conditions(count: usize) -> Vec<ConditionSpec> {
    let (defaults, _) = default_benchmark_specs();
    let mut out: Vec<ConditionSpec> = defaults.into_iter().take(count).collect();
    for j in out.len()..count {
        out.push(ConditionSpec {
            condition_id: format!("cond{j}"),
            base_frequency: 30.0 + ((j * 83) % 370) as f64,
            harmonic_count: 12,
            harmonic_decay: 0.8,
            noise_color: [-3.0, 0.0, -4.5][j % 3],
            noise_level: 0.5,
        });
    }
    out
}

pub fn benchmark_spec(seed: u64, options: &BenchmarkOptions) -> Result<DatasetSpec> {
    let mut spec = DatasetSpec::default_benchmark(seed);
    if let Some(m) = options.conditions {
        if m == 0 {
            return Err(Error::Usage("--conditions must be at least 1".into()));
        }
        spec.conditions = benchmark_conditions(m);
    }
    if let Some(ids) = &options.causes {
        let (_, all) = default_benchmark_specs();
        spec.causes = ids
            .iter()
            .map(|id| {
                all.iter()
                    .find(|c| c.cause_id == *id)
                    .cloned()
                    .ok_or_else(|| {
                        let known: Vec<_> = all.iter().map(|c| c.cause_id.as_str()).collect();
                        Error::Usage(format!(
                            "unknown cause `{id}`; known causes: {}",
                            known.join(", ")
                        ))
                    })
            })
            .collect::<Result<_>>()?;
    }
    if let Some(n) = options.train_per_condition {
        spec.train_per_condition = n;
    }
    if let Some(n) = options.test_per_condition {
        spec.test_per_condition = n;
    }
    spec.clip_seconds = options.clip_seconds.unwrap_or(DEFAULT_CLIP_SECONDS);
    if spec.train_per_condition < 2 || spec.test_per_condition < 1 {
        return Err(Error::Usage(
            "need at least 2 training and 1 test clip per condition".into(),
        ));
    }
    if !(spec.clip_seconds >= 1.0 && spec.clip_seconds <= 60.0) {
        return Err(Error::Usage(
            "clip length must be within [1, 60] seconds".into(),
        ));
    }
    Ok(spec)
}

/// Render every clip of `spec` under `root`, then write the manifest and
/// `specs.json`. Returns the manifest entries.
pub fn write_dataset(
    root: &Path,
    spec: &DatasetSpec,
    encoding: WavEncoding,
) -> Result<Vec<ManifestEntry>> {
    let plan = plan_dataset(spec)?;
    plan.par_iter()
        .map(|p| {
            let clip = p.render(spec).map_err(|e| Error::Clip {
                clip_id: p.entry.clip_id.clone(),
                source: Box::new(e.into()),
            })?;
            save_wav(&root.join(&p.entry.path), &clip, encoding)
        })
        .collect::<Result<Vec<()>>>()?;
    let entries: Vec<ManifestEntry> = plan.into_iter().map(|p| p.entry).collect();
    write_json(&root.join(SPECS_FILE), spec)?;
    write_manifest(&root.join(MANIFEST_FILE), &entries)?;
    Ok(entries)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn extra_conditions_are_valid_and_distinct() {
        let conds = benchmark_conditions(8);
        assert_eq!(conds.len(), 8);
        assert_eq!(conds[0].condition_id, "speed60");
        let mut ids: Vec<_> = conds.iter().map(|c| c.condition_id.clone()).collect();
        ids.dedup();
        assert_eq!(ids.len(), 8);
        for c in &conds {
            c.validate().unwrap();
        }
    }

    #[test]
    fn options_are_checked() {
        let opts = BenchmarkOptions {
            causes: Some(vec!["buzz".into(), "nope".into()]),
            ..Default::default()
        };
        assert!(matches!(benchmark_spec(1, &opts), Err(Error::Usage(_))));
        let opts = BenchmarkOptions {
            conditions: Some(2),
            causes: Some(vec!["boom".into()]),
            train_per_condition: Some(4),
            test_per_condition: Some(2),
            clip_seconds: Some(1.0),
        };
        let spec = benchmark_spec(1, &opts).unwrap();
        assert_eq!(spec.conditions.len(), 2);
        assert_eq!(spec.causes[0].cause_id, "boom");
    }

    #[test]
    fn writes_manifest_specs_and_audio() {
        let dir = tempfile::tempdir().unwrap();
        let opts = BenchmarkOptions {
            conditions: Some(1),
            causes: Some(vec!["buzz".into()]),
            train_per_condition: Some(2),
            test_per_condition: Some(1),
            clip_seconds: Some(1.0),
        };
        let spec = benchmark_spec(7, &opts).unwrap();
        let entries = write_dataset(dir.path(), &spec, WavEncoding::Pcm16).unwrap();
        assert_eq!(entries.len(), 4);
        for e in &entries {
            assert!(dir.path().join(&e.path).exists(), "{}", e.path);
        }
        let back: DatasetSpec = crate::formats::read_json(&dir.path().join(SPECS_FILE)).unwrap();
        assert_eq!(back, spec);
        assert_eq!(
            crate::formats::read_manifest(&dir.path().join(MANIFEST_FILE)).unwrap(),
            entries
        );
    }
}
