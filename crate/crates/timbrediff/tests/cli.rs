use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use timbrediff::formats::{
    read_manifest, read_results, read_timbre, write_manifest, TIMBRE_HEADER,
};
use timbrediff::tdce::write_embeddings;
use timbrediff::wav::{load_wav, save_wav, WavEncoding};
use timbrediff_core::signal::resample;
use timbrediff_core::{compute_timbre_vector, Embedding, ManifestEntry};

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_timbrediff"))
        .args(args)
        .output()
        .unwrap()
}

fn ok(args: &[&str]) -> Output {
    let out = run(args);
    assert!(
        out.status.success(),
        "{args:?}: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

struct Fixture {
    _dir: tempfile::TempDir,
    root: PathBuf,
}

impl Fixture {
    fn new() -> Self {
        let dir = tempfile::tempdir().unwrap();
        let root = dir.path().to_path_buf();
        ok(&[
            "synth",
            "--out",
            s(&root.join("data")),
            "--seed",
            "3",
            "--conditions",
            "2",
            "--causes",
            "buzz,boom",
            "--train-per-cond",
            "6",
            "--test-per-cond",
            "2",
            "--clip-seconds",
            "1",
        ]);
        Fixture { _dir: dir, root }
    }

    fn p(&self, name: &str) -> PathBuf {
        self.root.join(name)
    }

    fn data(&self) -> PathBuf {
        self.p("data")
    }

    fn manifest(&self) -> PathBuf {
        self.data().join("manifest.csv")
    }

    fn fit(&self, extra: &[&str]) -> Output {
        let (m, d, out) = (self.manifest(), self.data(), self.p("model"));
        let mut args = vec![
            "fit",
            "--manifest",
            s(&m),
            "--audio-root",
            s(&d),
            "--out",
            s(&out),
            "--k",
            "3",
        ];
        args.extend_from_slice(extra);
        run(&args)
    }

    fn score(&self, out: &str, extra: &[&str]) -> Output {
        let (model, m, d, out) = (self.p("model"), self.manifest(), self.data(), self.p(out));
        let mut args = vec![
            "score",
            "--model",
            s(&model),
            "--manifest",
            s(&m),
            "--audio-root",
            s(&d),
            "--out",
            s(&out),
        ];
        args.extend_from_slice(extra);
        run(&args)
    }

    fn gen_gt(&self) -> Output {
        ok(&[
            "gen-gt",
            "--manifest",
            s(&self.manifest()),
            "--audio-root",
            s(&self.data()),
            "--out",
            s(&self.p("gt.csv")),
        ])
    }

    fn eval(&self, results: &Path) -> Output {
        run(&[
            "eval",
            "--results",
            s(results),
            "--gt",
            s(&self.p("gt.csv")),
            "--manifest",
            s(&self.manifest()),
            "--out",
            s(&self.p("report.json")),
        ])
    }
}

#[test]
fn synth_layout() {
    let f = Fixture::new();
    let entries = read_manifest(&f.manifest()).unwrap();
    // 2 conditions x (6 train + 2 normal test + 2 causes x 2 anomalous)
    assert_eq!(entries.len(), 2 * (6 + 2 + 4));
    assert!(f.data().join("specs.json").exists());
    for e in &entries {
        let clip = load_wav(&f.data().join(&e.path)).unwrap();
        assert_eq!(clip.sample_rate(), 16_000);
    }
}

#[test]
fn usage_errors_exit_2() {
    assert_eq!(run(&["fit"]).status.code(), Some(2));
    assert_eq!(run(&["nonsense"]).status.code(), Some(2));
    assert_eq!(
        run(&["synth", "--out", "/tmp/x", "--seed", "notanumber"])
            .status
            .code(),
        Some(2)
    );
    let f = Fixture::new();
    assert_eq!(f.fit(&["--provider", "external"]).status.code(), Some(2));
    assert_eq!(f.fit(&["--provider", "bogus"]).status.code(), Some(2));
    assert_eq!(f.fit(&["--t", "0.5"]).status.code(), Some(2));
    let out = run(&[
        "synth",
        "--out",
        s(&f.p("x")),
        "--seed",
        "1",
        "--causes",
        "rattle",
    ]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("rattle"));
}

#[test]
fn pipeline_with_global_baseline_and_coverage_gap() {
    let f = Fixture::new();
    assert!(f.fit(&["--provider", "spectral"]).status.success());
    assert!(f.score("results.csv", &[]).status.success());
    assert!(f
        .score("global.csv", &["--baseline", "global"])
        .status
        .success());

    let gt = f.gen_gt();
    assert!(String::from_utf8_lossy(&gt.stderr).contains("t_prime: 0.05"));
    let stats: serde_json::Value = serde_json::from_slice(&gt.stdout).unwrap();
    assert_eq!(stats["groups"], 4);
    let c = &stats["counts"];
    assert_eq!(
        c["minus"].as_u64().unwrap() + c["zero"].as_u64().unwrap() + c["plus"].as_u64().unwrap(),
        20
    );

    let local = read_results(&f.p("results.csv")).unwrap();
    let global = read_results(&f.p("global.csv")).unwrap();
    assert_eq!(local.len(), 12);
    for (a, b) in local.iter().zip(&global) {
        assert_eq!(a.anomaly_score, b.anomaly_score);
    }

    assert!(f.eval(&f.p("results.csv")).status.success());
    let report: serde_json::Value =
        serde_json::from_slice(&std::fs::read(f.p("report.json")).unwrap()).unwrap();
    assert_eq!(report["n_clips"], 12);
    assert!(report["mae"]["roughness"].is_number());

    // drop one anomalous clip from the results
    let text = std::fs::read_to_string(f.p("results.csv")).unwrap();
    let missing = local.last().unwrap().clip_id.clone();
    let kept: String = text
        .lines()
        .filter(|l| !l.starts_with(&missing))
        .map(|l| format!("{l}\n"))
        .collect();
    std::fs::write(f.p("partial.csv"), kept).unwrap();
    let out = f.eval(&f.p("partial.csv"));
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains(&missing));
}

#[test]
fn score_rejects_mismatches() {
    let f = Fixture::new();
    assert!(f.fit(&["--provider", "timbre"]).status.success());
    let config: serde_json::Value =
        serde_json::from_slice(&std::fs::read(f.p("model/config.json")).unwrap()).unwrap();
    assert_eq!(config["provider_id"], "timbre");
    assert_eq!(config["distance_kind"], "euclidean");
    assert_eq!(config["k"], 3);
    assert_eq!(
        f.score("r.csv", &["--provider", "spectral"]).status.code(),
        Some(1)
    );
    // 12 training clips cannot supply 13 neighbours
    assert_eq!(f.score("r.csv", &["--k", "13"]).status.code(), Some(1));
    assert!(f
        .score(
            "r.csv",
            &["--distance", "cosine", "--k", "12", "--t", "0.3"]
        )
        .status
        .success());
    assert!(!f.p("model_missing").exists());
    let out = run(&[
        "score",
        "--model",
        s(&f.p("model_missing")),
        "--manifest",
        s(&f.manifest()),
        "--audio-root",
        s(&f.data()),
        "--out",
        s(&f.p("r2.csv")),
    ]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn external_provider_uses_tdce() {
    let f = Fixture::new();
    let entries = read_manifest(&f.manifest()).unwrap();
    // a toy external encoder: index-based 3-d features
    let embs: Vec<Embedding> = entries
        .iter()
        .enumerate()
        .map(|(i, e)| {
            let x = i as f32;
            Embedding::new(
                vec![x, (x * 0.7).sin(), 1.0 + (i % 3) as f32],
                "external",
                e.clip_id.clone(),
            )
            .unwrap()
        })
        .collect();
    let tdce = f.p("ext.tdce");
    write_embeddings(&tdce, &embs).unwrap();
    assert!(f
        .fit(&["--provider", "external", "--embeddings", s(&tdce)])
        .status
        .success());
    assert!(f
        .score("ext.csv", &["--embeddings", s(&tdce)])
        .status
        .success());
    assert_eq!(read_results(&f.p("ext.csv")).unwrap().len(), 12);

    // a test clip without an embedding is a coverage gap
    let missing = entries
        .iter()
        .find(|e| e.is_test())
        .unwrap()
        .clip_id
        .clone();
    let partial: Vec<Embedding> = embs.into_iter().filter(|e| e.clip_id != missing).collect();
    write_embeddings(&tdce, &partial).unwrap();
    let out = f.score("ext2.csv", &["--embeddings", s(&tdce)]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains(&missing));
}

#[test]
fn extract_writes_nine_significant_digits() {
    let f = Fixture::new();
    let out = f.p("timbre.csv");
    ok(&[
        "extract",
        "--manifest",
        s(&f.manifest()),
        "--audio-root",
        s(&f.data()),
        "--out",
        s(&out),
        "--split",
        "train",
    ]);
    let text = std::fs::read_to_string(&out).unwrap();
    assert_eq!(text.lines().next().unwrap(), TIMBRE_HEADER.join(","));
    for field in text.lines().nth(1).unwrap().split(',').skip(1) {
        let digits = field.trim_start_matches(['-', '0', '.']).replace('.', "");
        assert_eq!(digits.len(), 9, "{field}");
    }
    assert_eq!(read_timbre(&out).unwrap().len(), 12);
}

#[test]
fn foreign_rate_audio_is_resampled_on_ingest() {
    let f = Fixture::new();
    let entries = read_manifest(&f.manifest()).unwrap();
    // re-encode every clip at 44.1 kHz float and point a new manifest at the copies
    let moved: Vec<ManifestEntry> = entries
        .iter()
        .map(|e| {
            let clip = load_wav(&f.data().join(&e.path)).unwrap();
            let up = resample(&clip, 44_100).unwrap();
            let path = format!("hi/{}.wav", e.clip_id);
            save_wav(&f.data().join(&path), &up, WavEncoding::Float32).unwrap();
            ManifestEntry { path, ..e.clone() }
        })
        .collect();
    let manifest = f.data().join("hi.csv");
    write_manifest(&manifest, &moved).unwrap();
    ok(&[
        "extract",
        "--manifest",
        s(&manifest),
        "--audio-root",
        s(&f.data()),
        "--out",
        s(&f.p("hi_timbre.csv")),
    ]);
    // the CLI must see exactly what an explicit conversion to 16 kHz gives
    let hi = read_timbre(&f.p("hi_timbre.csv")).unwrap();
    assert_eq!(hi.len(), moved.len());
    for ((id, got), e) in hi.iter().zip(&moved) {
        assert_eq!(*id, e.clip_id);
        let clip = resample(&load_wav(&f.data().join(&e.path)).unwrap(), 16_000).unwrap();
        let want = compute_timbre_vector(&clip).unwrap();
        for (x, y) in got.values().iter().zip(want.values()) {
            assert!(((x - y) / y).abs() < 1e-8, "{x} vs {y}");
        }
    }
}

#[test]
fn missing_audio_names_the_clip() {
    let f = Fixture::new();
    let entries = read_manifest(&f.manifest()).unwrap();
    let victim = &entries[0];
    std::fs::remove_file(f.data().join(&victim.path)).unwrap();
    let out = f.fit(&["--provider", "timbre"]);
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(
        err.contains(&victim.clip_id) && err.contains("not found"),
        "{err}"
    );
}
