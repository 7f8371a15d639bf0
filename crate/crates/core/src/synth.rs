//! Deterministic synthetic machine sounds.
//!
//! A condition is a harmonic stack over a rotation fundamental plus colored
//! noise; an anomaly cause is a transform applied on top of it (amplitude
//! modulation buzz, spectral shelves, or an injected tone). Every clip is
//! peak-normalized and then given a random gain, so nothing downstream may
//! depend on recording level.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use core::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::fft::{real_inverse, real_spectrum, FftPlan};
use crate::groundtruth::{Domain, ManifestEntry, Split, State};
use crate::signal::{AudioClip, CANONICAL_RATE};

pub const PEAK_LEVEL: f64 = 0.9;
pub const GAIN_RANGE: (f64, f64) = (0.5, 1.0);
/// 32768 samples at 16 kHz, a power-of-two FFT length.
pub const DEFAULT_CLIP_SECONDS: f64 = 2.048;
/// Width of the raised-cosine shelf transition, in octaves.
pub const SHELF_TRANSITION_OCTAVES: f64 = 1.0 / 3.0;
const FREQ_JITTER: f64 = 0.005;
const AMPLITUDE_JITTER: f64 = 0.15;

/// One operating/recording condition of the simulated machine.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ConditionSpec {
    pub condition_id: String,
    /// Rotation fundamental in Hz.
    pub base_frequency: f64,
    pub harmonic_count: usize,
    /// Amplitude ratio between consecutive harmonics.
    pub harmonic_decay: f64,
    /// Noise spectral tilt in dB per octave.
    pub noise_color: f64,
    /// Noise RMS relative to the harmonic stack RMS.
    pub noise_level: f64,
}

impl ConditionSpec {
    pub fn validate(&self) -> Result<()> {
        let fail = |msg: &str| {
            Err(Error::InvalidParameter(format!(
                "condition `{}`: {msg}",
                self.condition_id
            )))
        };
        if !(30.0..=400.0).contains(&self.base_frequency) {
            return fail("base frequency must be within [30, 400] Hz");
        }
        if self.harmonic_count == 0 {
            return fail("need at least one harmonic");
        }
        if !(self.harmonic_decay >= 0.0 && self.noise_level >= 0.0 && self.noise_color.is_finite())
        {
            return fail("levels must be non-negative");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(tag = "kind", rename_all = "snake_case"))]
pub enum Transform {
    /// Multiply by `1 + depth * sin(2 pi mod_freq t)`.
    AmBuzz { mod_freq: f64, depth: f64 },
    /// Gain above `cutoff` with a raised-cosine transition.
    HighShelf { cutoff: f64, gain_db: f64 },
    /// Gain below `cutoff` with a raised-cosine transition.
    LowShelf { cutoff: f64, gain_db: f64 },
    /// Add a sine whose RMS is `level` times the clip RMS.
    ToneInject { freq: f64, level: f64 },
}

impl Transform {
    fn validate(&self, nyquist: f64) -> Result<()> {
        let ok = match *self {
            Transform::AmBuzz { mod_freq, depth } => {
                mod_freq > 0.0 && mod_freq < nyquist && depth > 0.0 && depth <= 1.0
            }
            Transform::HighShelf { cutoff, gain_db } | Transform::LowShelf { cutoff, gain_db } => {
                cutoff > 0.0 && cutoff < nyquist && gain_db.is_finite()
            }
            Transform::ToneInject { freq, level } => {
                freq > 0.0 && freq < nyquist && level >= 0.0 && level.is_finite()
            }
        };
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidParameter(format!(
                "transform parameters out of range: {self:?}"
            )))
        }
    }
}

/// A failure mode and the timbre directions it is meant to produce.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct AnomalyCauseSpec {
    pub cause_id: String,
    pub transform: Transform,
    /// Expected label per attribute, in attribute order. Used by tests only.
    pub intended_directions: [i8; 5],
}

fn condition(
    id: &str,
    base: f64,
    count: usize,
    decay: f64,
    color: f64,
    level: f64,
) -> ConditionSpec {
    ConditionSpec {
        condition_id: id.into(),
        base_frequency: base,
        harmonic_count: count,
        harmonic_decay: decay,
        noise_color: color,
        noise_level: level,
    }
}

fn cause(id: &str, transform: Transform, directions: [i8; 5]) -> AnomalyCauseSpec {
    AnomalyCauseSpec {
        cause_id: id.into(),
        transform,
        intended_directions: directions,
    }
}

/// Three conditions and four anomaly causes.
pub fn default_benchmark_specs() -> (Vec<ConditionSpec>, Vec<AnomalyCauseSpec>) {
    let conditions = alloc::vec![
        condition("speed60", 60.0, 24, 0.85, -3.0, 0.5),
        condition("speed120", 120.0, 16, 0.8, 0.0, 0.4),
        condition("speed240", 240.0, 10, 0.75, -4.5, 0.6),
    ];
    let causes = alloc::vec![
        cause(
            "buzz",
            Transform::AmBuzz {
                mod_freq: 70.0,
                depth: 0.8
            },
            [0, 1, 0, 0, 0]
        ),
        cause(
            "shrill",
            Transform::HighShelf {
                cutoff: 2000.0,
                gain_db: 12.0
            },
            [1, 0, 0, 1, 0]
        ),
        cause(
            "boom",
            Transform::LowShelf {
                cutoff: 250.0,
                gain_db: 12.0
            },
            [0, 0, 1, 0, 1]
        ),
        cause(
            "muffled",
            Transform::HighShelf {
                cutoff: 2000.0,
                gain_db: -12.0
            },
            [-1, 0, 0, -1, 0]
        ),
    ];
    (conditions, causes)
}

/// Shelf position in `[0, 1]`: 0 below the transition, 1 above it.
fn shelf_position(f: f64, cutoff: f64) -> f64 {
    let lo = cutoff * libm::exp2(-SHELF_TRANSITION_OCTAVES / 2.0);
    let hi = cutoff * libm::exp2(SHELF_TRANSITION_OCTAVES / 2.0);
    if f <= lo {
        0.0
    } else if f >= hi {
        1.0
    } else {
        let x = libm::log2(f / lo) / SHELF_TRANSITION_OCTAVES;
        0.5 - 0.5 * libm::cos(PI * x)
    }
}

/// Multiply each frequency bin by `gain(f)`.
fn spectral_mask(signal: &[f64], rate: f64, gain: impl Fn(f64) -> f64) -> Vec<f64> {
    let n = signal.len();
    let plan = FftPlan::new(n);
    let mut spectrum = real_spectrum(&plan, signal);
    for (k, c) in spectrum.iter_mut().enumerate() {
        let f = k.min(n - k) as f64 * rate / n as f64;
        *c *= gain(f);
    }
    real_inverse(&plan, &mut spectrum)
}

fn rms(x: &[f64]) -> f64 {
    libm::sqrt(x.iter().map(|v| v * v).sum::<f64>() / x.len() as f64)
}

pub fn apply_transform(signal: &[f64], rate: f64, transform: &Transform) -> Vec<f64> {
    match *transform {
        Transform::AmBuzz { mod_freq, depth } => signal
            .iter()
            .enumerate()
            .map(|(n, x)| x * (1.0 + depth * libm::sin(2.0 * PI * mod_freq * n as f64 / rate)))
            .collect(),
        Transform::HighShelf { cutoff, gain_db } => spectral_mask(signal, rate, |f| {
            libm::pow(10.0, gain_db * shelf_position(f, cutoff) / 20.0)
        }),
        Transform::LowShelf { cutoff, gain_db } => spectral_mask(signal, rate, |f| {
            libm::pow(10.0, gain_db * (1.0 - shelf_position(f, cutoff)) / 20.0)
        }),
        Transform::ToneInject { freq, level } => {
            let amp = level * rms(signal) * core::f64::consts::SQRT_2;
            signal
                .iter()
                .enumerate()
                .map(|(n, x)| x + amp * libm::sin(2.0 * PI * freq * n as f64 / rate))
                .collect()
        }
    }
}

/// Synthesize one clip at the canonical rate.
///
/// All random draws happen before the anomaly transform, so a normal and an
/// anomalous clip with the same seed share their underlying machine sound.
pub fn generate_clip(
    cond: &ConditionSpec,
    cause: Option<&AnomalyCauseSpec>,
    duration: f64,
    seed: u64,
) -> Result<AudioClip> {
    cond.validate()?;
    if duration.is_nan() || duration < 1.0 {
        return Err(Error::InvalidParameter(
            "duration must be at least 1 s".into(),
        ));
    }
    let rate = CANONICAL_RATE as f64;
    let nyquist = rate / 2.0;
    if let Some(c) = cause {
        c.transform.validate(nyquist)?;
    }
    let n = libm::round(duration * rate) as usize;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    let f0 = cond.base_frequency * (1.0 + rng.random_range(-FREQ_JITTER..=FREQ_JITTER));
    let mut harmonics = Vec::with_capacity(cond.harmonic_count);
    let mut amp = 1.0;
    for h in 1..=cond.harmonic_count {
        let jitter = 1.0 + rng.random_range(-AMPLITUDE_JITTER..=AMPLITUDE_JITTER);
        let phase = rng.random_range(0.0..2.0 * PI);
        let freq = f0 * h as f64;
        if freq < nyquist {
            harmonics.push((freq, amp * jitter, phase));
        }
        amp *= cond.harmonic_decay;
    }
    let white: Vec<f64> = (0..n).map(|_| StandardNormal.sample(&mut rng)).collect();
    let gain = rng.random_range(GAIN_RANGE.0..=GAIN_RANGE.1);

    let stack: Vec<f64> = (0..n)
        .map(|i| {
            let t = i as f64 / rate;
            harmonics
                .iter()
                .map(|&(f, a, p)| a * libm::sin(2.0 * PI * f * t + p))
                .sum()
        })
        .collect();
    // amplitude slope in dB/octave -> power law exponent
    let exponent = cond.noise_color / (20.0 * libm::log10(2.0));
    let colored = spectral_mask(&white, rate, |f| {
        if f < 20.0 {
            0.0
        } else {
            libm::pow(f / 1000.0, exponent)
        }
    });
    let noise_scale = cond.noise_level * rms(&stack) / rms(&colored).max(1e-300);
    let mut signal: Vec<f64> = stack
        .iter()
        .zip(&colored)
        .map(|(s, c)| s + noise_scale * c)
        .collect();

    if let Some(c) = cause {
        signal = apply_transform(&signal, rate, &c.transform);
    }
    let peak = signal.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if peak == 0.0 {
        return Err(Error::SilentInput);
    }
    let scale = PEAK_LEVEL / peak * gain;
    AudioClip::new(signal.iter().map(|v| v * scale).collect(), CANONICAL_RATE)
}

/// 64-bit FNV-1a, used to derive per-clip seeds from clip ids.
pub fn stable_hash(text: &str) -> u64 {
    text.bytes().fold(0xcbf2_9ce4_8422_2325, |h, b| {
        (h ^ b as u64).wrapping_mul(0x0100_0000_01b3)
    })
}

pub fn clip_seed(master_seed: u64, clip_id: &str) -> u64 {
    master_seed ^ stable_hash(clip_id)
}

/// Everything needed to regenerate a synthetic dataset.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct DatasetSpec {
    pub seed: u64,
    pub conditions: Vec<ConditionSpec>,
    pub causes: Vec<AnomalyCauseSpec>,
    pub train_per_condition: usize,
    pub test_per_condition: usize,
    pub clip_seconds: f64,
}

impl DatasetSpec {
    pub fn default_benchmark(seed: u64) -> Self {
        let (conditions, causes) = default_benchmark_specs();
        Self {
            seed,
            conditions,
            causes,
            train_per_condition: 50,
            test_per_condition: 10,
            clip_seconds: DEFAULT_CLIP_SECONDS,
        }
    }
}

/// A manifest row together with how to synthesize its audio.
#[derive(Debug, Clone, PartialEq)]
pub struct PlannedClip {
    pub entry: ManifestEntry,
    pub condition: usize,
    pub cause: Option<usize>,
    pub seed: u64,
}

impl PlannedClip {
    pub fn render(&self, spec: &DatasetSpec) -> Result<AudioClip> {
        let cause = self.cause.map(|q| &spec.causes[q]);
        generate_clip(
            &spec.conditions[self.condition],
            cause,
            spec.clip_seconds,
            self.seed,
        )
    }
}

/// Lay out the dataset: per condition, normal training clips, normal test
/// clips, then one anomalous test set per cause. Paths are relative to the
/// dataset root.
pub fn plan_dataset(spec: &DatasetSpec) -> Result<Vec<PlannedClip>> {
    if spec.conditions.is_empty() || spec.causes.is_empty() {
        return Err(Error::InvalidParameter(
            "need at least one condition and one cause".into(),
        ));
    }
    for c in &spec.conditions {
        c.validate()?;
    }
    for q in &spec.causes {
        q.transform.validate(CANONICAL_RATE as f64 / 2.0)?;
    }
    let mut plan = Vec::new();
    let mut push = |id: String, split: Split, condition: usize, cause: Option<usize>| {
        let dir = match split {
            Split::Train => "train",
            Split::Test => "test",
        };
        plan.push(PlannedClip {
            entry: ManifestEntry {
                path: format!("{dir}/{id}.wav"),
                split,
                state: if cause.is_some() {
                    State::Anomalous
                } else {
                    State::Normal
                },
                condition: spec.conditions[condition].condition_id.clone(),
                cause: cause
                    .map(|q| spec.causes[q].cause_id.clone())
                    .unwrap_or_default(),
                domain: Domain::Source,
                clip_id: id.clone(),
            },
            condition,
            cause,
            seed: clip_seed(spec.seed, &id),
        });
    };
    for (m, cond) in spec.conditions.iter().enumerate() {
        let cid = &cond.condition_id;
        for i in 0..spec.train_per_condition {
            push(format!("{cid}_train_normal_{i:04}"), Split::Train, m, None);
        }
        for i in 0..spec.test_per_condition {
            push(format!("{cid}_test_normal_{i:04}"), Split::Test, m, None);
        }
        for (q, cause) in spec.causes.iter().enumerate() {
            for i in 0..spec.test_per_condition {
                push(
                    format!("{cid}_test_{}_{i:04}", cause.cause_id),
                    Split::Test,
                    m,
                    Some(q),
                );
            }
        }
    }
    Ok(plan)
}
