use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use timbrediff::dataset::BenchmarkOptions;
use timbrediff::formats::stats_json;
use timbrediff::pipeline::{
    self, Baseline, EvalArgs, ExtractArgs, FitArgs, GenGtArgs, ScoreArgs, SynthArgs,
};
use timbrediff::wav::WavEncoding;
use timbrediff_core::groundtruth::{Split, DEFAULT_T_PRIME};
use timbrediff_core::DistanceKind;

#[derive(Parser)]
#[command(
    name = "timbrediff",
    version,
    about = "Anomalous sound detection with timbre difference labels"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum DistanceArg {
    Euclidean,
    Cosine,
}

impl From<DistanceArg> for DistanceKind {
    fn from(d: DistanceArg) -> Self {
        match d {
            DistanceArg::Euclidean => DistanceKind::Euclidean,
            DistanceArg::Cosine => DistanceKind::Cosine,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum SplitArg {
    Train,
    Test,
    All,
}

#[derive(Clone, Copy, ValueEnum)]
enum BaselineArg {
    Neighbors,
    Global,
}

#[derive(Clone, Copy, ValueEnum)]
enum EncodingArg {
    Pcm16,
    Float32,
}

#[derive(Subcommand)]
enum Command {
    /// Generate the synthetic benchmark dataset.
    Synth {
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        seed: u64,
        /// Number of operating conditions.
        #[arg(long)]
        conditions: Option<usize>,
        /// Comma-separated anomaly causes, or `default`.
        #[arg(long)]
        causes: Option<String>,
        #[arg(long)]
        train_per_cond: Option<usize>,
        #[arg(long)]
        test_per_cond: Option<usize>,
        #[arg(long)]
        clip_seconds: Option<f64>,
        #[arg(long, value_enum, default_value = "pcm16")]
        encoding: EncodingArg,
    },
    /// Compute timbre metrics for manifest clips.
    Extract {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        audio_root: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, value_enum, default_value = "all")]
        split: SplitArg,
    },
    /// Build a reference set from the normal training clips.
    Fit {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        audio_root: PathBuf,
        #[arg(long, default_value = "spectral")]
        provider: String,
        /// Precomputed embeddings for the external provider.
        #[arg(long)]
        embeddings: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, value_enum)]
        distance: Option<DistanceArg>,
        #[arg(long)]
        k: Option<usize>,
        #[arg(long)]
        t: Option<f64>,
    },
    /// Score test clips against a fitted model.
    Score {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        audio_root: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        embeddings: Option<PathBuf>,
        /// Expected provider; fails when the model was fitted with another.
        #[arg(long)]
        provider: Option<String>,
        #[arg(long, value_enum)]
        distance: Option<DistanceArg>,
        #[arg(long)]
        k: Option<usize>,
        #[arg(long)]
        t: Option<f64>,
        #[arg(long, value_enum, default_value = "neighbors")]
        baseline: BaselineArg,
    },
    /// Derive ground-truth timbre difference labels per condition and cause.
    GenGt {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        audio_root: PathBuf,
        #[arg(long, default_value_t = DEFAULT_T_PRIME)]
        t_prime: f64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Compute detection AUC and timbre label MAE.
    Eval {
        #[arg(long)]
        results: PathBuf,
        #[arg(long)]
        gt: PathBuf,
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

fn run(command: Command) -> timbrediff::Result<()> {
    match command {
        Command::Synth {
            out,
            seed,
            conditions,
            causes,
            train_per_cond,
            test_per_cond,
            clip_seconds,
            encoding,
        } => {
            let causes = causes
                .filter(|c| c != "default")
                .map(|c| c.split(',').map(|s| s.trim().to_string()).collect());
            pipeline::synth(&SynthArgs {
                out,
                seed,
                options: BenchmarkOptions {
                    conditions,
                    causes,
                    train_per_condition: train_per_cond,
                    test_per_condition: test_per_cond,
                    clip_seconds,
                },
                encoding: match encoding {
                    EncodingArg::Pcm16 => WavEncoding::Pcm16,
                    EncodingArg::Float32 => WavEncoding::Float32,
                },
            })?;
        }
        Command::Extract {
            manifest,
            audio_root,
            out,
            split,
        } => {
            pipeline::extract(&ExtractArgs {
                manifest,
                audio_root,
                out,
                split: match split {
                    SplitArg::Train => Some(Split::Train),
                    SplitArg::Test => Some(Split::Test),
                    SplitArg::All => None,
                },
            })?;
        }
        Command::Fit {
            manifest,
            audio_root,
            provider,
            embeddings,
            out,
            distance,
            k,
            t,
        } => {
            pipeline::fit(&FitArgs {
                manifest,
                audio_root,
                provider,
                embeddings,
                out,
                distance: distance.map(Into::into),
                k,
                t,
            })?;
        }
        Command::Score {
            model,
            manifest,
            audio_root,
            out,
            embeddings,
            provider,
            distance,
            k,
            t,
            baseline,
        } => {
            pipeline::score(&ScoreArgs {
                model,
                manifest,
                audio_root,
                out,
                embeddings,
                provider,
                distance: distance.map(Into::into),
                k,
                t,
                baseline: match baseline {
                    BaselineArg::Neighbors => Baseline::Neighbors,
                    BaselineArg::Global => Baseline::Global,
                },
            })?;
        }
        Command::GenGt {
            manifest,
            audio_root,
            t_prime,
            out,
        } => {
            let stats = pipeline::gen_gt(&GenGtArgs {
                manifest,
                audio_root,
                t_prime,
                out,
            })?;
            print!("{}", stats_json(&stats));
        }
        Command::Eval {
            results,
            gt,
            manifest,
            out,
        } => {
            pipeline::eval(&EvalArgs {
                results,
                gt,
                manifest,
                out,
            })?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::new()
        .filter_level(log::LevelFilter::Info)
        .format_timestamp(None)
        .format_target(false)
        .init();
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            log::error!("{e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
