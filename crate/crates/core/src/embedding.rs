//! Embedding providers, feature standardization and distances.

use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::signal::{default_stft, AudioClip, Spectrogram};
use crate::timbre::{TimbreVector, SILENCE_THRESHOLD};

pub const TIMBRE_PROVIDER: &str = "timbre";
pub const SPECTRAL_PROVIDER: &str = "spectral";
pub const EXTERNAL_PROVIDER: &str = "external";

pub const MEL_BANDS: usize = 40;
pub const SPECTRAL_DIM: usize = 2 * MEL_BANDS;
pub const TIMBRE_DIM: usize = 5;
pub const LOG_FLOOR: f64 = 1e-10;
pub const STD_FLOOR: f64 = 1e-9;

/// Where embeddings come from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "lowercase"))]
pub enum Provider {
    /// Standardized timbre metrics.
    Timbre,
    /// Log-mel band means and standard deviations.
    Spectral,
    /// Vectors computed elsewhere and imported from a file.
    External,
}

impl Provider {
    pub fn id(self) -> &'static str {
        match self {
            Provider::Timbre => TIMBRE_PROVIDER,
            Provider::Spectral => SPECTRAL_PROVIDER,
            Provider::External => EXTERNAL_PROVIDER,
        }
    }

    pub fn from_id(id: &str) -> Option<Self> {
        [Provider::Timbre, Provider::Spectral, Provider::External]
            .into_iter()
            .find(|p| p.id() == id)
    }

    /// Declared dimension, when fixed by the provider.
    pub fn dim(self) -> Option<usize> {
        match self {
            Provider::Timbre => Some(TIMBRE_DIM),
            Provider::Spectral => Some(SPECTRAL_DIM),
            Provider::External => None,
        }
    }

    pub fn default_distance(self) -> DistanceKind {
        match self {
            Provider::Timbre => DistanceKind::Euclidean,
            Provider::Spectral | Provider::External => DistanceKind::Cosine,
        }
    }
}

/// A clip's position in embedding space.
#[derive(Debug, Clone, PartialEq)]
pub struct Embedding {
    pub vector: Vec<f32>,
    pub provider_id: String,
    pub clip_id: String,
}

impl Embedding {
    pub fn new(
        vector: Vec<f32>,
        provider_id: impl Into<String>,
        clip_id: impl Into<String>,
    ) -> Result<Self> {
        if vector.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite);
        }
        Ok(Self {
            vector,
            provider_id: provider_id.into(),
            clip_id: clip_id.into(),
        })
    }

    pub fn dim(&self) -> usize {
        self.vector.len()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "lowercase"))]
pub enum DistanceKind {
    #[default]
    Euclidean,
    Cosine,
}

impl DistanceKind {
    pub fn name(self) -> &'static str {
        match self {
            DistanceKind::Euclidean => "euclidean",
            DistanceKind::Cosine => "cosine",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        match name {
            "euclidean" => Some(DistanceKind::Euclidean),
            "cosine" => Some(DistanceKind::Cosine),
            _ => None,
        }
    }
}

/// Distance between raw vectors of equal length.
///
/// Cosine distance against a zero vector is 1 (similarity taken as 0).
pub fn vector_distance(u: &[f32], v: &[f32], kind: DistanceKind) -> f64 {
    debug_assert_eq!(u.len(), v.len());
    match kind {
        DistanceKind::Euclidean => {
            let sq: f64 = u
                .iter()
                .zip(v)
                .map(|(&a, &b)| {
                    let d = a as f64 - b as f64;
                    d * d
                })
                .sum();
            libm::sqrt(sq)
        }
        DistanceKind::Cosine => {
            let (mut dot, mut nu, mut nv) = (0.0, 0.0, 0.0);
            for (&a, &b) in u.iter().zip(v) {
                let (a, b) = (a as f64, b as f64);
                dot += a * b;
                nu += a * a;
                nv += b * b;
            }
            if nu == 0.0 || nv == 0.0 {
                return 1.0;
            }
            let sim = (dot / (libm::sqrt(nu) * libm::sqrt(nv))).clamp(-1.0, 1.0);
            // identical directions must give exactly zero
            if u == v {
                0.0
            } else {
                (1.0 - sim).max(0.0)
            }
        }
    }
}

pub fn distance(u: &Embedding, v: &Embedding, kind: DistanceKind) -> Result<f64> {
    if u.provider_id != v.provider_id {
        return Err(Error::ProviderMismatch {
            expected: u.provider_id.clone(),
            actual: v.provider_id.clone(),
        });
    }
    if u.dim() != v.dim() {
        return Err(Error::DimensionMismatch {
            expected: u.dim(),
            actual: v.dim(),
        });
    }
    Ok(vector_distance(&u.vector, &v.vector, kind))
}

/// Per-dimension mean and population standard deviation.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct NormalizationStats {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl NormalizationStats {
    pub fn new(mean: Vec<f64>, std: Vec<f64>) -> Result<Self> {
        if mean.len() != std.len() {
            return Err(Error::DimensionMismatch {
                expected: mean.len(),
                actual: std.len(),
            });
        }
        if mean.iter().chain(&std).any(|v| !v.is_finite()) {
            return Err(Error::NonFinite);
        }
        if std.iter().any(|&s| s < STD_FLOOR) {
            return Err(Error::InvalidParameter(
                "standard deviation below floor".to_string(),
            ));
        }
        Ok(Self { mean, std })
    }

    /// Zero mean, unit deviation stats of the given dimension.
    pub fn identity(dim: usize) -> Self {
        Self {
            mean: vec![0.0; dim],
            std: vec![1.0; dim],
        }
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    /// z-score a raw vector.
    pub fn apply(&self, raw: &[f64]) -> Result<Vec<f64>> {
        if raw.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                actual: raw.len(),
            });
        }
        Ok(raw
            .iter()
            .zip(self.mean.iter().zip(&self.std))
            .map(|(x, (m, s))| (x - m) / s)
            .collect())
    }
}

/// Fit standardization statistics (Welford's single-pass update), with the
/// deviation clamped below at [`STD_FLOOR`].
pub fn fit_normalization<V: AsRef<[f64]>>(vectors: &[V]) -> Result<NormalizationStats> {
    if vectors.len() < 2 {
        return Err(Error::NotEnoughData {
            needed: 2,
            actual: vectors.len(),
        });
    }
    let dim = vectors[0].as_ref().len();
    let mut mean = vec![0.0; dim];
    let mut m2 = vec![0.0; dim];
    for (n, v) in vectors.iter().enumerate() {
        let v = v.as_ref();
        if v.len() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                actual: v.len(),
            });
        }
        let count = (n + 1) as f64;
        for ((m, s), &x) in mean.iter_mut().zip(m2.iter_mut()).zip(v) {
            let delta = x - *m;
            *m += delta / count;
            *s += delta * (x - *m);
        }
    }
    let n = vectors.len() as f64;
    let std = m2
        .iter()
        .map(|s| libm::sqrt(s / n).max(STD_FLOOR))
        .collect();
    NormalizationStats::new(mean, std)
}

fn to_f32(v: &[f64]) -> Vec<f32> {
    v.iter().map(|&x| x as f32).collect()
}

pub fn embed_timbre(
    clip_id: &str,
    vec: &TimbreVector,
    stats: &NormalizationStats,
) -> Result<Embedding> {
    let z = stats.apply(vec.values())?;
    Embedding::new(to_f32(&z), TIMBRE_PROVIDER, clip_id)
}

fn hz_to_mel(f: f64) -> f64 {
    2595.0 * libm::log10(1.0 + f / 700.0)
}

fn mel_to_hz(m: f64) -> f64 {
    700.0 * (libm::pow(10.0, m / 2595.0) - 1.0)
}

/// Triangular mel filters (HTK scale) over the STFT bins, `bands x bins`.
pub fn mel_filterbank(bin_freqs: &[f64], bands: usize, f_min: f64, f_max: f64) -> Vec<Vec<f64>> {
    let (lo, hi) = (hz_to_mel(f_min), hz_to_mel(f_max));
    let centers: Vec<f64> = (0..bands + 2)
        .map(|i| mel_to_hz(lo + (hi - lo) * i as f64 / (bands + 1) as f64))
        .collect();
    (0..bands)
        .map(|b| {
            let (left, center, right) = (centers[b], centers[b + 1], centers[b + 2]);
            bin_freqs
                .iter()
                .map(|&f| {
                    if f <= left || f >= right {
                        0.0
                    } else if f <= center {
                        (f - left) / (center - left)
                    } else {
                        (right - f) / (right - center)
                    }
                })
                .collect()
        })
        .collect()
}

/// Per-frame log mel energies, `frames x bands`.
pub fn log_mel_frames(spec: &Spectrogram) -> Vec<Vec<f64>> {
    let filters = mel_filterbank(spec.bin_freqs(), MEL_BANDS, 0.0, spec.nyquist().min(8000.0));
    spec.frames()
        .map(|frame| {
            filters
                .iter()
                .map(|w| {
                    let e: f64 = w.iter().zip(frame).map(|(a, p)| a * p).sum();
                    libm::log(e.max(LOG_FLOOR))
                })
                .collect()
        })
        .collect()
}

/// The 80-dimensional raw spectral feature: 40 log-mel band means followed
/// by 40 log-mel band population standard deviations over frames.
pub fn log_mel_statistics(clip: &AudioClip) -> Result<Vec<f64>> {
    let spec = default_stft(clip)?;
    if spec.total_power() <= SILENCE_THRESHOLD {
        return Err(Error::SilentInput);
    }
    let frames = log_mel_frames(&spec);
    let n = frames.len() as f64;
    let mut out = vec![0.0; SPECTRAL_DIM];
    for b in 0..MEL_BANDS {
        let mean = frames.iter().map(|f| f[b]).sum::<f64>() / n;
        let var = frames
            .iter()
            .map(|f| (f[b] - mean) * (f[b] - mean))
            .sum::<f64>()
            / n;
        out[b] = mean;
        out[MEL_BANDS + b] = libm::sqrt(var);
    }
    Ok(out)
}

pub fn embed_spectral(
    clip_id: &str,
    clip: &AudioClip,
    stats: &NormalizationStats,
) -> Result<Embedding> {
    if stats.dim() != SPECTRAL_DIM {
        return Err(Error::DimensionMismatch {
            expected: SPECTRAL_DIM,
            actual: stats.dim(),
        });
    }
    let z = stats.apply(&log_mel_statistics(clip)?)?;
    Embedding::new(to_f32(&z), SPECTRAL_PROVIDER, clip_id)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::signal::tests::{noise, sine};
    use core::f64::consts::PI;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn emb(v: &[f32]) -> Embedding {
        Embedding::new(v.to_vec(), "p", "c").unwrap()
    }

    #[test]
    fn distance_examples() {
        for kind in [DistanceKind::Euclidean, DistanceKind::Cosine] {
            assert_eq!(
                distance(&emb(&[0.3, -2.0]), &emb(&[0.3, -2.0]), kind).unwrap(),
                0.0
            );
        }
        let (x, y) = (emb(&[1.0, 0.0]), emb(&[0.0, 1.0]));
        assert!(
            (distance(&x, &y, DistanceKind::Euclidean).unwrap() - libm::sqrt(2.0)).abs() < 1e-15
        );
        assert_eq!(distance(&x, &y, DistanceKind::Cosine).unwrap(), 1.0);
        let z = emb(&[2.0, 0.0]);
        assert_eq!(distance(&x, &z, DistanceKind::Euclidean).unwrap(), 1.0);
        assert!(distance(&x, &z, DistanceKind::Cosine).unwrap().abs() < 1e-15);
    }

    #[test]
    fn cosine_zero_guard() {
        let zero = emb(&[0.0, 0.0]);
        assert_eq!(
            distance(&zero, &emb(&[1.0, 2.0]), DistanceKind::Cosine).unwrap(),
            1.0
        );
        assert_eq!(distance(&zero, &zero, DistanceKind::Cosine).unwrap(), 1.0);
    }

    #[test]
    fn distance_mismatches() {
        let a = emb(&[1.0, 0.0]);
        assert!(matches!(
            distance(&a, &emb(&[1.0]), DistanceKind::Euclidean),
            Err(Error::DimensionMismatch { .. })
        ));
        let other = Embedding::new(vec![1.0, 0.0], "q", "c").unwrap();
        assert!(matches!(
            distance(&a, &other, DistanceKind::Euclidean),
            Err(Error::ProviderMismatch { .. })
        ));
    }

    proptest! {
        #[test]
        fn distance_properties(
            u in prop::collection::vec(-10.0f32..10.0, 4),
            v in prop::collection::vec(-10.0f32..10.0, 4),
            w in prop::collection::vec(-10.0f32..10.0, 4),
            scale in 0.01f32..50.0,
        ) {
            for kind in [DistanceKind::Euclidean, DistanceKind::Cosine] {
                prop_assert_eq!(vector_distance(&u, &v, kind), vector_distance(&v, &u, kind));
            }
            let e = DistanceKind::Euclidean;
            prop_assert!(vector_distance(&u, &w, e) <= vector_distance(&u, &v, e) + vector_distance(&v, &w, e) + 1e-9);
            let scaled: Vec<f32> = u.iter().map(|x| x * scale).collect();
            let c = DistanceKind::Cosine;
            // f32 rounding of the scaled copy dominates the error budget
            prop_assert!((vector_distance(&scaled, &v, c) - vector_distance(&u, &v, c)).abs() < 1e-6);
        }
    }

    #[test]
    fn cosine_scale_invariance_exact_scales() {
        // power-of-two scaling is exact in f32
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..200 {
            let u: Vec<f32> = (0..6).map(|_| rng.random_range(-3.0..3.0)).collect();
            let v: Vec<f32> = (0..6).map(|_| rng.random_range(-3.0..3.0)).collect();
            let s: Vec<f32> = u.iter().map(|x| x * 4.0).collect();
            let a = vector_distance(&u, &v, DistanceKind::Cosine);
            let b = vector_distance(&s, &v, DistanceKind::Cosine);
            assert!((a - b).abs() < 1e-9);
        }
    }

    #[test]
    fn fit_examples() {
        let stats = fit_normalization(&[vec![0.0], vec![2.0]]).unwrap();
        assert_eq!(stats.mean, vec![1.0]);
        assert_eq!(stats.std, vec![1.0]);
        let flat = fit_normalization(&[vec![3.0, 3.0], vec![3.0, 3.0], vec![3.0, 3.0]]).unwrap();
        assert_eq!(flat.std, vec![STD_FLOOR, STD_FLOOR]);
    }

    #[test]
    fn fit_errors() {
        assert_eq!(
            fit_normalization(&[vec![1.0]]),
            Err(Error::NotEnoughData {
                needed: 2,
                actual: 1
            })
        );
        assert!(matches!(
            fit_normalization(&[vec![1.0], vec![1.0, 2.0]]),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn fit_matches_two_pass_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(1000);
        let data: Vec<Vec<f64>> = (0..1000)
            .map(|_| {
                (0..3)
                    .map(|d| rng.random_range(-1.0..1.0) * (d + 1) as f64 + d as f64)
                    .collect()
            })
            .collect();
        let stats = fit_normalization(&data).unwrap();
        for d in 0..3 {
            let mean = data.iter().map(|v| v[d]).sum::<f64>() / 1000.0;
            let var = data
                .iter()
                .map(|v| (v[d] - mean) * (v[d] - mean))
                .sum::<f64>()
                / 1000.0;
            assert!((stats.mean[d] - mean).abs() < 1e-12);
            assert!((stats.std[d] - libm::sqrt(var)).abs() < 1e-12);
        }
        // standardized training data has zero mean and unit deviation
        let z: Vec<Vec<f64>> = data.iter().map(|v| stats.apply(v).unwrap()).collect();
        for d in 0..3 {
            let mean = z.iter().map(|v| v[d]).sum::<f64>() / 1000.0;
            let var = z.iter().map(|v| (v[d] - mean) * (v[d] - mean)).sum::<f64>() / 1000.0;
            assert!(mean.abs() < 1e-9);
            assert!((libm::sqrt(var) - 1.0).abs() < 1e-6);
        }
    }

    #[test]
    fn timbre_embedding_is_a_z_score() {
        let stats =
            NormalizationStats::new(vec![1.0, 2.0, 3.0, 4.0, 5.0], vec![0.5, 1.0, 2.0, 4.0, 8.0])
                .unwrap();
        let at_mean = TimbreVector::new([1.0, 2.0, 3.0, 4.0, 5.0]).unwrap();
        assert_eq!(
            embed_timbre("a", &at_mean, &stats).unwrap().vector,
            vec![0.0; 5]
        );
        let one_up = TimbreVector::new([1.5, 3.0, 5.0, 8.0, 13.0]).unwrap();
        assert_eq!(
            embed_timbre("a", &one_up, &stats).unwrap().vector,
            vec![1.0; 5]
        );
        let raw = TimbreVector::new([0.1, 0.2, 0.3, 0.4, 0.5]).unwrap();
        let ident = embed_timbre("a", &raw, &NormalizationStats::identity(5)).unwrap();
        assert_eq!(ident.vector, vec![0.1f32, 0.2, 0.3, 0.4, 0.5]);
        assert!(matches!(
            embed_timbre("a", &raw, &NormalizationStats::identity(3)),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    fn clip(x: Vec<f64>) -> AudioClip {
        AudioClip::new(x, 16000).unwrap()
    }

    #[test]
    fn spectral_gain_shifts_means_only() {
        let x: Vec<f64> = noise(4, 16000);
        let a = log_mel_statistics(&clip(x.clone())).unwrap();
        let b = log_mel_statistics(&clip(x.iter().map(|v| v * 2.0).collect())).unwrap();
        for i in 0..MEL_BANDS {
            assert!((b[i] - a[i] - libm::log(4.0)).abs() < 1e-9);
            assert!((b[MEL_BANDS + i] - a[MEL_BANDS + i]).abs() < 1e-9);
        }
    }

    #[test]
    fn spectral_std_part_sees_modulation() {
        let steady = sine(1000.0, 0.5, 16000, 16000);
        let pulsed: Vec<f64> = steady
            .iter()
            .enumerate()
            .map(|(n, v)| v * (1.0 + 0.9 * libm::sin(2.0 * PI * 3.0 * n as f64 / 16000.0)))
            .collect();
        let a = log_mel_statistics(&clip(steady)).unwrap();
        let b = log_mel_statistics(&clip(pulsed)).unwrap();
        let energy = |v: &[f64]| v[MEL_BANDS..].iter().map(|s| s * s).sum::<f64>();
        assert!(energy(&a) < 0.01 * energy(&b));
    }

    #[test]
    fn spectral_embedding_checks() {
        let x = clip(noise(7, 8000));
        let stats = NormalizationStats::identity(SPECTRAL_DIM);
        let a = embed_spectral("x", &x, &stats).unwrap();
        assert_eq!(a, embed_spectral("x", &x, &stats).unwrap());
        assert_eq!(a.dim(), SPECTRAL_DIM);
        assert_eq!(a.provider_id, SPECTRAL_PROVIDER);
        assert!(embed_spectral("x", &clip(vec![0.0; 8000]), &stats).is_err());
        assert!(embed_spectral("x", &x, &NormalizationStats::identity(5)).is_err());
    }

    #[test]
    fn mel_filters_cover_range() {
        let freqs: Vec<f64> = (0..513).map(|i| i as f64 * 16000.0 / 1024.0).collect();
        let fb = mel_filterbank(&freqs, MEL_BANDS, 0.0, 8000.0);
        assert_eq!(fb.len(), MEL_BANDS);
        for w in &fb {
            assert!(w.iter().any(|&x| x > 0.0));
            assert!(w.iter().all(|&x| (0.0..=1.0).contains(&x)));
        }
    }
}
