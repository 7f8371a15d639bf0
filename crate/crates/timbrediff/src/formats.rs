//! CSV and JSON formats: manifests, timbre tables, results, ground truth
//! and reports.

use std::collections::BTreeMap;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use timbrediff_core::groundtruth::{
    validate_manifest, Domain, GroundTruthStats, LabelCounts, Split, State,
};
use timbrediff_core::{
    EvalReport, GroundTruthRecord, Label, ManifestEntry, TimbreAttribute, TimbreDiffResult,
    TimbreVector,
};

use crate::error::{Error, Result};
use crate::fsutil::{atomic_write, read_bytes};

pub const MANIFEST_HEADER: [&str; 7] = [
    "clip_id",
    "path",
    "split",
    "state",
    "condition",
    "cause",
    "domain",
];
pub const TIMBRE_HEADER: [&str; 6] = [
    "clip_id",
    "sharpness",
    "roughness",
    "boominess",
    "brightness",
    "depth",
];
pub const RESULTS_HEADER: [&str; 12] = [
    "clip_id",
    "anomaly_score",
    "sharpness_score",
    "roughness_score",
    "boominess_score",
    "brightness_score",
    "depth_score",
    "sharpness_label",
    "roughness_label",
    "boominess_label",
    "brightness_label",
    "depth_label",
];
pub const GROUND_TRUTH_HEADER: [&str; 5] = ["condition", "cause", "attribute", "score", "label"];

/// How floats are printed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Precision {
    /// Nine significant digits.
    Sig9,
    /// Shortest text that parses back to the same value.
    Lossless,
}

pub fn format_float(x: f64, precision: Precision) -> String {
    match precision {
        Precision::Lossless => format!("{x}"),
        Precision::Sig9 => {
            if x == 0.0 || !x.is_finite() {
                return format!("{x}");
            }
            let exp = x.abs().log10().floor() as i32;
            if (-5..=15).contains(&exp) {
                // rounding can carry into a new digit; re-derive from the result
                let decimals = (8 - exp).max(0) as usize;
                let s = format!("{x:.decimals$}");
                let digits = s.trim_start_matches(['-', '0', '.']).replace('.', "").len();
                if digits > 9 && decimals > 0 {
                    format!("{x:.prec$}", prec = decimals - 1)
                } else {
                    s
                }
            } else {
                format!("{x:.8e}")
            }
        }
    }
}

fn reader(path: &Path) -> Result<(csv::Reader<std::io::Cursor<Vec<u8>>>, csv::StringRecord)> {
    let bytes = read_bytes(path)?;
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_reader(std::io::Cursor::new(bytes));
    let header = rdr.headers().map_err(|e| Error::format(path, e))?.clone();
    Ok((rdr, header))
}

fn check_header(path: &Path, header: &csv::StringRecord, expected: &[&str]) -> Result<()> {
    if header.iter().map(str::trim).ne(expected.iter().copied()) {
        return Err(Error::format(
            path,
            format!(
                "header is `{}`, expected `{}`",
                header.iter().collect::<Vec<_>>().join(","),
                expected.join(",")
            ),
        ));
    }
    Ok(())
}

fn records(path: &Path, expected: &[&str]) -> Result<Vec<csv::StringRecord>> {
    let (mut rdr, header) = reader(path)?;
    check_header(path, &header, expected)?;
    rdr.records()
        .enumerate()
        .map(|(i, r)| r.map_err(|e| Error::format(path, format!("row {}: {e}", i + 1))))
        .collect()
}

fn parse<T: FromStr>(path: &Path, row: usize, column: &str, text: &str) -> Result<T> {
    text.trim()
        .parse()
        .map_err(|_| Error::format(path, format!("row {row}: cannot parse {column} `{text}`")))
}

fn finish_csv(path: &Path, w: csv::Writer<Vec<u8>>) -> Result<()> {
    let bytes = w.into_inner().map_err(|e| Error::format(path, e))?;
    atomic_write(path, &bytes)
}

fn write_row<I, S>(path: &Path, w: &mut csv::Writer<Vec<u8>>, row: I) -> Result<()>
where
    I: IntoIterator<Item = S>,
    S: AsRef<[u8]>,
{
    w.write_record(row).map_err(|e| Error::format(path, e))
}

fn split_name(s: Split) -> &'static str {
    match s {
        Split::Train => "train",
        Split::Test => "test",
    }
}

fn state_name(s: State) -> &'static str {
    match s {
        State::Normal => "normal",
        State::Anomalous => "anomalous",
    }
}

fn domain_name(d: Domain) -> &'static str {
    match d {
        Domain::Source => "source",
        Domain::Target => "target",
    }
}

/// Read and validate a manifest. Errors name the 1-based data row.
pub fn read_manifest(path: &Path) -> Result<Vec<ManifestEntry>> {
    let rows = records(path, &MANIFEST_HEADER)?;
    let mut entries = Vec::with_capacity(rows.len());
    for (i, r) in rows.iter().enumerate() {
        let row = i + 1;
        let bad =
            |col: &str, v: &str| Error::format(path, format!("row {row}: invalid {col} `{v}`"));
        let split = match r[2].trim() {
            "train" => Split::Train,
            "test" => Split::Test,
            v => return Err(bad("split", v)),
        };
        let state = match r[3].trim() {
            "normal" => State::Normal,
            "anomalous" => State::Anomalous,
            v => return Err(bad("state", v)),
        };
        let domain = match r[6].trim() {
            "" | "source" => Domain::Source,
            "target" => Domain::Target,
            v => return Err(bad("domain", v)),
        };
        entries.push(ManifestEntry {
            clip_id: r[0].trim().to_string(),
            path: r[1].trim().to_string(),
            split,
            state,
            condition: r[4].trim().to_string(),
            cause: r[5].trim().to_string(),
            domain,
        });
    }
    validate_manifest(&entries).map_err(|e| Error::format(path, e))?;
    Ok(entries)
}

pub fn write_manifest(path: &Path, entries: &[ManifestEntry]) -> Result<()> {
    let mut w = csv::Writer::from_writer(Vec::new());
    write_row(path, &mut w, MANIFEST_HEADER)?;
    for e in entries {
        write_row(
            path,
            &mut w,
            [
                e.clip_id.as_str(),
                e.path.as_str(),
                split_name(e.split),
                state_name(e.state),
                e.condition.as_str(),
                e.cause.as_str(),
                domain_name(e.domain),
            ],
        )?;
    }
    finish_csv(path, w)
}

/// Clip ids with their timbre vectors, in file order.
pub type TimbreTable = Vec<(String, TimbreVector)>;

pub fn write_timbre(
    path: &Path,
    rows: &[(String, TimbreVector)],
    precision: Precision,
) -> Result<()> {
    let mut w = csv::Writer::from_writer(Vec::new());
    write_row(path, &mut w, TIMBRE_HEADER)?;
    for (id, v) in rows {
        let mut row = vec![id.clone()];
        row.extend(v.values().iter().map(|&x| format_float(x, precision)));
        write_row(path, &mut w, row)?;
    }
    finish_csv(path, w)
}

pub fn read_timbre(path: &Path) -> Result<TimbreTable> {
    let rows = records(path, &TIMBRE_HEADER)?;
    rows.iter()
        .enumerate()
        .map(|(i, r)| {
            let mut values = [0.0; 5];
            for (a, v) in TimbreAttribute::ALL.iter().zip(values.iter_mut()) {
                *v = parse(path, i + 1, a.name(), &r[a.index() + 1])?;
            }
            let vec = TimbreVector::new(values)
                .map_err(|e| Error::format(path, format!("row {}: {e}", i + 1)))?;
            Ok((r[0].trim().to_string(), vec))
        })
        .collect()
}

pub fn write_results(path: &Path, results: &[TimbreDiffResult]) -> Result<()> {
    let mut w = csv::Writer::from_writer(Vec::new());
    write_row(path, &mut w, RESULTS_HEADER)?;
    for r in results {
        let mut row = vec![r.clip_id.clone(), format!("{}", r.anomaly_score)];
        row.extend(r.attribute_scores.iter().map(|s| format!("{s}")));
        row.extend(r.attribute_labels.iter().map(|l| l.to_string()));
        write_row(path, &mut w, row)?;
    }
    finish_csv(path, w)
}

/// Read scored clips; neighbour indices are not stored and come back empty.
pub fn read_results(path: &Path) -> Result<Vec<TimbreDiffResult>> {
    let rows = records(path, &RESULTS_HEADER)?;
    rows.iter()
        .enumerate()
        .map(|(i, r)| {
            let row = i + 1;
            let mut attribute_scores = [0.0; 5];
            let mut attribute_labels = [Label::Unchanged; 5];
            for l in 0..5 {
                attribute_scores[l] = parse(path, row, RESULTS_HEADER[2 + l], &r[2 + l])?;
                let v: i64 = parse(path, row, RESULTS_HEADER[7 + l], &r[7 + l])?;
                attribute_labels[l] = Label::from_value(v)
                    .map_err(|e| Error::format(path, format!("row {row}: {e}")))?;
            }
            Ok(TimbreDiffResult {
                clip_id: r[0].trim().to_string(),
                anomaly_score: parse(path, row, "anomaly_score", &r[1])?,
                attribute_scores,
                attribute_labels,
                neighbor_indices: Vec::new(),
            })
        })
        .collect()
}

/// One row per (condition, cause, attribute).
pub fn write_ground_truth(path: &Path, records: &[GroundTruthRecord]) -> Result<()> {
    let mut w = csv::Writer::from_writer(Vec::new());
    write_row(path, &mut w, GROUND_TRUTH_HEADER)?;
    for rec in records {
        for a in TimbreAttribute::ALL {
            write_row(
                path,
                &mut w,
                [
                    rec.condition.clone(),
                    rec.cause.clone(),
                    a.name().to_string(),
                    format!("{}", rec.scores[a.index()]),
                    rec.labels[a.index()].to_string(),
                ],
            )?;
        }
    }
    finish_csv(path, w)
}

pub fn read_ground_truth(path: &Path) -> Result<Vec<GroundTruthRecord>> {
    let rows = records(path, &GROUND_TRUTH_HEADER)?;
    type Cells = [Option<(f64, Label)>; 5];
    let mut groups: BTreeMap<(String, String), Cells> = BTreeMap::new();
    for (i, r) in rows.iter().enumerate() {
        let row = i + 1;
        let attr = TimbreAttribute::from_name(r[2].trim()).ok_or_else(|| {
            Error::format(path, format!("row {row}: unknown attribute `{}`", &r[2]))
        })?;
        let score: f64 = parse(path, row, "score", &r[3])?;
        let label = Label::from_value(parse(path, row, "label", &r[4])?)
            .map_err(|e| Error::format(path, format!("row {row}: {e}")))?;
        let slot = &mut groups
            .entry((r[0].trim().to_string(), r[1].trim().to_string()))
            .or_default()[attr.index()];
        if slot.replace((score, label)).is_some() {
            return Err(Error::format(
                path,
                format!("row {row}: duplicate {attr} entry"),
            ));
        }
    }
    groups
        .into_iter()
        .map(|((condition, cause), cells)| {
            let mut scores = [0.0; 5];
            let mut labels = [Label::Unchanged; 5];
            for (a, cell) in TimbreAttribute::ALL.iter().zip(cells) {
                let (s, l) = cell.ok_or_else(|| {
                    Error::format(
                        path,
                        format!("group ({condition}, {cause}) lacks attribute {a}"),
                    )
                })?;
                scores[a.index()] = s;
                labels[a.index()] = l;
            }
            Ok(GroundTruthRecord {
                condition,
                cause,
                scores,
                labels,
            })
        })
        .collect()
}

/// One value per timbre attribute, serialized by attribute name.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PerAttribute<T> {
    pub sharpness: T,
    pub roughness: T,
    pub boominess: T,
    pub brightness: T,
    pub depth: T,
}

impl<T: Copy> PerAttribute<T> {
    pub fn from_array(v: [T; 5]) -> Self {
        Self {
            sharpness: v[0],
            roughness: v[1],
            boominess: v[2],
            brightness: v[3],
            depth: v[4],
        }
    }
}

/// Evaluation report as written to JSON.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportJson {
    pub detection_auc: f64,
    pub mae: PerAttribute<f64>,
    pub mean_mae: f64,
    pub counts: PerAttribute<LabelCounts>,
    pub n_clips: usize,
}

impl From<&EvalReport> for ReportJson {
    fn from(r: &EvalReport) -> Self {
        Self {
            detection_auc: r.detection_auc,
            mae: PerAttribute::from_array(r.mae),
            mean_mae: r.mean_mae,
            counts: PerAttribute::from_array(r.counts),
            n_clips: r.n_clips,
        }
    }
}

pub fn to_json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("plain data serializes");
    s.push('\n');
    s
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    atomic_write(path, to_json(value).as_bytes())
}

pub fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    serde_json::from_slice(&read_bytes(path)?).map_err(|e| Error::format(path, e))
}

pub fn stats_json(stats: &GroundTruthStats) -> String {
    to_json(stats)
}
