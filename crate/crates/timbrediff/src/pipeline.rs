//! The command implementations behind the CLI.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use log::info;
use rayon::prelude::*;
use timbrediff_core::embedding::{fit_normalization, log_mel_statistics};
use timbrediff_core::groundtruth::{
    generate_ground_truth, ground_truth_statistics, GroundTruthStats, Split,
};
use timbrediff_core::knn::{global_baseline_score, score_clip, DEFAULT_K, DEFAULT_THRESHOLD};
use timbrediff_core::label::threshold_label;
use timbrediff_core::synth::DatasetSpec;
use timbrediff_core::{
    build_report, compute_timbre_vector, DistanceKind, Embedding, EvalReport, ManifestEntry,
    NormalizationStats, Provider, ReferenceSet, TimbreDiffResult, TimbreVector,
};

use crate::dataset::{benchmark_spec, write_dataset, BenchmarkOptions};
use crate::error::{Error, Result};
use crate::formats::{
    read_ground_truth, read_manifest, read_results, write_ground_truth, write_json, write_results,
    write_timbre, Precision, ReportJson,
};
use crate::model::{load_model, save_model, Model};
use crate::tdce::read_embeddings;
use crate::wav::{load_canonical, WavEncoding};

fn in_clip<T>(clip_id: &str, r: impl Into<Result<T>>) -> Result<T> {
    r.into().map_err(|e| Error::Clip {
        clip_id: clip_id.to_string(),
        source: Box::new(e),
    })
}

fn core<T>(r: timbrediff_core::Result<T>) -> Result<T> {
    r.map_err(Error::from)
}

/// Timbre metrics and, when asked for, the raw log-mel statistics of a clip.
fn analyze(
    entry: &ManifestEntry,
    audio_root: &Path,
    spectral: bool,
) -> Result<(TimbreVector, Option<Vec<f64>>)> {
    let run = || -> Result<_> {
        let clip = load_canonical(&audio_root.join(&entry.path))?;
        let timbre = core(compute_timbre_vector(&clip))?;
        let raw = if spectral {
            Some(core(log_mel_statistics(&clip))?)
        } else {
            None
        };
        Ok((timbre, raw))
    };
    in_clip(&entry.clip_id, run())
}

fn analyze_all(
    entries: &[&ManifestEntry],
    audio_root: &Path,
    spectral: bool,
) -> Result<Vec<(TimbreVector, Option<Vec<f64>>)>> {
    entries
        .par_iter()
        .map(|e| analyze(e, audio_root, spectral))
        .collect()
}

pub fn timbre_of(entries: &[&ManifestEntry], audio_root: &Path) -> Result<Vec<TimbreVector>> {
    Ok(analyze_all(entries, audio_root, false)?
        .into_iter()
        .map(|(t, _)| t)
        .collect())
}

fn external_lookup(path: Option<&Path>) -> Result<BTreeMap<String, Vec<f64>>> {
    let path =
        path.ok_or_else(|| Error::Usage("provider `external` needs --embeddings FILE".into()))?;
    let embeddings = read_embeddings(path, Provider::External.id())?;
    Ok(embeddings
        .into_iter()
        .map(|e| (e.clip_id, e.vector.iter().map(|&v| v as f64).collect()))
        .collect())
}

/// Raw (pre-normalization) embedding vectors for `entries`, plus timbre.
fn raw_features(
    provider: Provider,
    entries: &[&ManifestEntry],
    audio_root: &Path,
    external: Option<&Path>,
) -> Result<(Vec<TimbreVector>, Vec<Vec<f64>>)> {
    let lookup = match provider {
        Provider::External => Some(external_lookup(external)?),
        _ => None,
    };
    let analyzed = analyze_all(entries, audio_root, provider == Provider::Spectral)?;
    let mut timbre = Vec::with_capacity(entries.len());
    let mut raw = Vec::with_capacity(entries.len());
    for (e, (t, spectral)) in entries.iter().zip(analyzed) {
        let v = match provider {
            Provider::Timbre => t.values().to_vec(),
            Provider::Spectral => spectral.expect("spectral features requested"),
            Provider::External => lookup
                .as_ref()
                .and_then(|m| m.get(&e.clip_id))
                .cloned()
                .ok_or_else(|| Error::Coverage(e.clip_id.clone()))?,
        };
        timbre.push(t);
        raw.push(v);
    }
    Ok((timbre, raw))
}

fn embed(
    provider: Provider,
    stats: &NormalizationStats,
    clip_id: &str,
    raw: &[f64],
) -> Result<Embedding> {
    let z = core(stats.apply(raw))?;
    core(Embedding::new(
        z.iter().map(|&x| x as f32).collect(),
        provider.id(),
        clip_id,
    ))
}

fn parse_provider(id: &str) -> Result<Provider> {
    Provider::from_id(id).ok_or_else(|| {
        Error::Usage(format!(
            "unknown provider `{id}`; use timbre, spectral or external"
        ))
    })
}

fn check_t(t: f64) -> Result<f64> {
    // probe the threshold once so usage mistakes fail before any audio work
    threshold_label(0.5, t).map_err(|e| Error::Usage(e.to_string()))?;
    Ok(t)
}

fn select(entries: &[ManifestEntry], split: Split) -> Vec<&ManifestEntry> {
    entries.iter().filter(|e| e.split == split).collect()
}

#[derive(Debug, Clone)]
pub struct SynthArgs {
    pub out: PathBuf,
    pub seed: u64,
    pub options: BenchmarkOptions,
    pub encoding: WavEncoding,
}

pub fn synth(args: &SynthArgs) -> Result<DatasetSpec> {
    let spec = benchmark_spec(args.seed, &args.options)?;
    let entries = write_dataset(&args.out, &spec, args.encoding)?;
    info!("wrote {} clips to {}", entries.len(), args.out.display());
    Ok(spec)
}

#[derive(Debug, Clone)]
pub struct ExtractArgs {
    pub manifest: PathBuf,
    pub audio_root: PathBuf,
    pub out: PathBuf,
    /// Restrict to one split; all clips otherwise.
    pub split: Option<Split>,
}

pub fn extract(args: &ExtractArgs) -> Result<Vec<(String, TimbreVector)>> {
    let entries = read_manifest(&args.manifest)?;
    let chosen: Vec<&ManifestEntry> = entries
        .iter()
        .filter(|e| args.split.is_none_or(|s| e.split == s))
        .collect();
    let timbre = timbre_of(&chosen, &args.audio_root)?;
    let rows: Vec<_> = chosen
        .iter()
        .map(|e| e.clip_id.clone())
        .zip(timbre)
        .collect();
    write_timbre(&args.out, &rows, Precision::Sig9)?;
    info!("extracted timbre metrics for {} clips", rows.len());
    Ok(rows)
}

#[derive(Debug, Clone)]
pub struct FitArgs {
    pub manifest: PathBuf,
    pub audio_root: PathBuf,
    pub provider: String,
    pub embeddings: Option<PathBuf>,
    pub out: PathBuf,
    pub distance: Option<DistanceKind>,
    pub k: Option<usize>,
    pub t: Option<f64>,
}

pub fn fit(args: &FitArgs) -> Result<Model> {
    let provider = parse_provider(&args.provider)?;
    let k = args.k.unwrap_or(DEFAULT_K);
    let t = check_t(args.t.unwrap_or(DEFAULT_THRESHOLD))?;
    if k == 0 {
        return Err(Error::Usage("k must be at least 1".into()));
    }
    let entries = read_manifest(&args.manifest)?;
    let train = select(&entries, Split::Train);
    if train.len() < k {
        return Err(timbrediff_core::Error::KTooLarge { k, n: train.len() }.into());
    }
    let (timbre, raw) = raw_features(
        provider,
        &train,
        &args.audio_root,
        args.embeddings.as_deref(),
    )?;
    let stats = core(fit_normalization(&raw))?;
    let embeddings = train
        .iter()
        .zip(&raw)
        .map(|(e, v)| embed(provider, &stats, &e.clip_id, v))
        .collect::<Result<Vec<_>>>()?;
    let distance = args.distance.unwrap_or(provider.default_distance());
    let reference = core(ReferenceSet::new(
        embeddings,
        timbre,
        provider.id(),
        distance,
        stats,
    ))?;
    let model = Model { reference, k, t };
    save_model(&args.out, &model)?;
    info!(
        "fitted {} reference clips with provider {} ({} distance, k = {k}, t = {t})",
        model.reference.len(),
        provider.id(),
        distance.name()
    );
    Ok(model)
}

/// How attribute scores are ranked.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Baseline {
    /// Against the k nearest normal clips.
    #[default]
    Neighbors,
    /// Against every normal training clip.
    Global,
}

#[derive(Debug, Clone)]
pub struct ScoreArgs {
    pub model: PathBuf,
    pub manifest: PathBuf,
    pub audio_root: PathBuf,
    pub out: PathBuf,
    pub embeddings: Option<PathBuf>,
    pub provider: Option<String>,
    pub distance: Option<DistanceKind>,
    pub k: Option<usize>,
    pub t: Option<f64>,
    pub baseline: Baseline,
}

pub fn score(args: &ScoreArgs) -> Result<Vec<TimbreDiffResult>> {
    let model = load_model(&args.model)?;
    let provider = parse_provider(model.reference.provider_id())?;
    if let Some(p) = &args.provider {
        if p != provider.id() {
            return Err(timbrediff_core::Error::ProviderMismatch {
                expected: provider.id().to_string(),
                actual: p.clone(),
            }
            .into());
        }
    }
    let k = args.k.unwrap_or(model.k);
    let t = check_t(args.t.unwrap_or(model.t))?;
    let mut reference = model.reference;
    if let Some(d) = args.distance {
        reference = reference.with_distance(d);
    }
    let entries = read_manifest(&args.manifest)?;
    let test = select(&entries, Split::Test);
    let (timbre, raw) = raw_features(
        provider,
        &test,
        &args.audio_root,
        args.embeddings.as_deref(),
    )?;
    let results = test
        .iter()
        .zip(timbre.iter().zip(&raw))
        .map(|(e, (tv, v))| {
            let emb = in_clip(
                &e.clip_id,
                embed(provider, reference.normalization(), &e.clip_id, v),
            )?;
            let mut r = in_clip(&e.clip_id, core(score_clip(&reference, &emb, tv, k, t)))?;
            if args.baseline == Baseline::Global {
                let g = core(global_baseline_score(&reference, tv, t))?;
                r.attribute_scores = g.scores;
                r.attribute_labels = g.labels;
            }
            Ok(r)
        })
        .collect::<Result<Vec<_>>>()?;
    write_results(&args.out, &results)?;
    info!(
        "scored {} test clips (k = {k}, t = {t}, baseline {:?})",
        results.len(),
        args.baseline
    );
    Ok(results)
}

#[derive(Debug, Clone)]
pub struct GenGtArgs {
    pub manifest: PathBuf,
    pub audio_root: PathBuf,
    pub t_prime: f64,
    pub out: PathBuf,
}

pub fn gen_gt(args: &GenGtArgs) -> Result<GroundTruthStats> {
    check_t(args.t_prime)?;
    info!("t_prime: {}", args.t_prime);
    let entries = read_manifest(&args.manifest)?;
    let needed: Vec<&ManifestEntry> = entries
        .iter()
        .filter(|e| e.is_train() || (e.is_test() && e.is_anomalous()))
        .collect();
    let timbre = timbre_of(&needed, &args.audio_root)?;
    let lookup: BTreeMap<String, TimbreVector> = needed
        .iter()
        .map(|e| e.clip_id.clone())
        .zip(timbre)
        .collect();
    let records = core(generate_ground_truth(&entries, &lookup, args.t_prime))?;
    write_ground_truth(&args.out, &records)?;
    let stats = ground_truth_statistics(&records);
    info!(
        "{} groups, {} distinct label vectors",
        stats.groups, stats.unique_vectors
    );
    Ok(stats)
}

#[derive(Debug, Clone)]
pub struct EvalArgs {
    pub results: PathBuf,
    pub gt: PathBuf,
    pub manifest: PathBuf,
    pub out: PathBuf,
}

pub fn eval(args: &EvalArgs) -> Result<EvalReport> {
    let results = read_results(&args.results)?;
    let records = read_ground_truth(&args.gt)?;
    let entries = read_manifest(&args.manifest)?;
    let report = build_report(&results, &entries, &records).map_err(|e| match e {
        timbrediff_core::Error::MissingPrediction(id) => Error::Coverage(id),
        other => other.into(),
    })?;
    write_json(&args.out, &ReportJson::from(&report))?;
    info!(
        "detection AUC {:.4}, mean MAE {:.4}",
        report.detection_auc, report.mean_mae
    );
    Ok(report)
}
