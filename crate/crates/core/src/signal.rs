//! Audio clips and the shared DSP front end: resampling, STFT power,
//! Bark band grouping and analytic band envelopes.

use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;

use crate::error::{Error, Result};
use crate::fft::{real_spectrum, Complex64, FftPlan};

/// Rate every clip is converted to on ingest.
pub const CANONICAL_RATE: u32 = 16_000;
pub const DEFAULT_FRAME_LEN: usize = 1024;
pub const DEFAULT_HOP: usize = 512;

/// Zwicker critical band edges in Hz (24 bands).
pub const BARK_EDGES: [f64; 25] = [
    20.0, 100.0, 200.0, 300.0, 400.0, 510.0, 630.0, 770.0, 920.0, 1080.0, 1270.0, 1480.0, 1720.0,
    2000.0, 2320.0, 2700.0, 3150.0, 3700.0, 4400.0, 5300.0, 6400.0, 7700.0, 9500.0, 12000.0,
    15500.0,
];

const RESAMPLE_TAPS: usize = 64;
const KAISER_BETA: f64 = 8.0;

/// Mono samples at a fixed rate.
#[derive(Debug, Clone, PartialEq)]
pub struct AudioClip {
    samples: Vec<f64>,
    sample_rate: u32,
}

impl AudioClip {
    pub fn new(samples: Vec<f64>, sample_rate: u32) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::InvalidClip("no samples"));
        }
        if sample_rate == 0 {
            return Err(Error::InvalidClip("sample rate must be positive"));
        }
        if samples.iter().any(|s| !s.is_finite()) {
            return Err(Error::InvalidClip("non-finite sample"));
        }
        Ok(Self {
            samples,
            sample_rate,
        })
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn sample_rate(&self) -> u32 {
        self.sample_rate
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn duration(&self) -> f64 {
        self.samples.len() as f64 / self.sample_rate as f64
    }

    pub fn nyquist(&self) -> f64 {
        self.sample_rate as f64 / 2.0
    }

    pub fn into_samples(self) -> Vec<f64> {
        self.samples
    }

    /// Copy with every sample multiplied by `gain`.
    pub fn scaled(&self, gain: f64) -> Self {
        Self {
            samples: self.samples.iter().map(|s| s * gain).collect(),
            sample_rate: self.sample_rate,
        }
    }
}

/// One-sided STFT power, frames by bins.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrogram {
    power: Vec<f64>,
    n_frames: usize,
    bin_freqs: Vec<f64>,
    frame_rate: f64,
}

impl Spectrogram {
    pub fn n_frames(&self) -> usize {
        self.n_frames
    }

    pub fn n_bins(&self) -> usize {
        self.bin_freqs.len()
    }

    pub fn bin_freqs(&self) -> &[f64] {
        &self.bin_freqs
    }

    pub fn frame_rate(&self) -> f64 {
        self.frame_rate
    }

    pub fn frame(&self, i: usize) -> &[f64] {
        let n = self.n_bins();
        &self.power[i * n..(i + 1) * n]
    }

    pub fn frames(&self) -> impl Iterator<Item = &[f64]> {
        self.power.chunks_exact(self.n_bins())
    }

    pub fn nyquist(&self) -> f64 {
        *self.bin_freqs.last().expect("spectrogram has bins")
    }

    /// Sum of power over every frame and bin.
    pub fn total_power(&self) -> f64 {
        self.power.iter().sum()
    }
}

/// Bark band powers per frame, restricted to the bands below Nyquist.
#[derive(Debug, Clone, PartialEq)]
pub struct BarkBandPowers {
    /// `(lo, hi)` in Hz; the last band may be truncated at Nyquist.
    pub edges: Vec<(f64, f64)>,
    /// Number of STFT bins averaged into each band.
    pub bin_counts: Vec<usize>,
    /// `frames[t][z]` is the mean member-bin power of band `z` in frame `t`.
    pub frames: Vec<Vec<f64>>,
}

impl BarkBandPowers {
    pub fn n_bands(&self) -> usize {
        self.edges.len()
    }

    /// Mean band power over frames.
    pub fn time_average(&self) -> Vec<f64> {
        let mut avg = vec![0.0; self.n_bands()];
        for frame in &self.frames {
            for (a, p) in avg.iter_mut().zip(frame) {
                *a += p;
            }
        }
        let n = self.frames.len().max(1) as f64;
        avg.iter_mut().for_each(|a| *a /= n);
        avg
    }
}

/// Per-band analytic envelopes of a clip.
#[derive(Debug, Clone, PartialEq)]
pub struct BandDecomposition {
    pub band_edges: Vec<(f64, f64)>,
    pub band_envelopes: Vec<Vec<f64>>,
}

/// Zeroth-order modified Bessel function of the first kind (power series).
fn bessel_i0(x: f64) -> f64 {
    let half_sq = x * x / 4.0;
    let mut term = 1.0;
    let mut sum = 1.0;
    let mut k = 1.0;
    while term > 1e-17 * sum {
        term *= half_sq / (k * k);
        sum += term;
        k += 1.0;
    }
    sum
}

fn sinc(x: f64) -> f64 {
    if x == 0.0 {
        1.0
    } else {
        let px = PI * x;
        libm::sin(px) / px
    }
}

/// Band-limited rate conversion with a 64-tap Kaiser-windowed sinc kernel.
pub fn resample(clip: &AudioClip, target_rate: u32) -> Result<AudioClip> {
    if target_rate == 0 {
        return Err(Error::InvalidParameter(
            "target rate must be positive".into(),
        ));
    }
    let source_rate = clip.sample_rate;
    if target_rate == source_rate {
        return Ok(clip.clone());
    }
    let ratio = target_rate as f64 / source_rate as f64;
    let out_len = libm::round(clip.len() as f64 * ratio).max(1.0) as usize;
    let cutoff = ratio.min(1.0);
    let half = (RESAMPLE_TAPS / 2) as f64;
    let norm = bessel_i0(KAISER_BETA);
    let input = clip.samples();
    let mut out = Vec::with_capacity(out_len);
    for j in 0..out_len {
        let pos = j as f64 / ratio;
        let base = libm::floor(pos) as i64;
        let mut acc = 0.0;
        for n in (base - half as i64 + 1)..=(base + half as i64) {
            if n < 0 || n as usize >= input.len() {
                continue;
            }
            let offset = pos - n as f64;
            let r = offset / half;
            if r.abs() >= 1.0 {
                continue;
            }
            let window = bessel_i0(KAISER_BETA * libm::sqrt(1.0 - r * r)) / norm;
            acc += input[n as usize] * cutoff * sinc(cutoff * offset) * window;
        }
        out.push(acc);
    }
    AudioClip::new(out, target_rate)
}

/// Periodic Hann window.
pub fn hann(len: usize) -> Vec<f64> {
    (0..len)
        .map(|n| 0.5 - 0.5 * libm::cos(2.0 * PI * n as f64 / len as f64))
        .collect()
}

/// Hann-windowed short-time power spectrum (no padding; frames start at
/// multiples of `hop` and lie fully inside the clip).
pub fn stft_power(clip: &AudioClip, frame_len: usize, hop: usize) -> Result<Spectrogram> {
    if !frame_len.is_power_of_two() || frame_len < 2 {
        return Err(Error::InvalidParameter(
            "frame length must be a power of two".into(),
        ));
    }
    if hop == 0 || hop > frame_len {
        return Err(Error::InvalidParameter(
            "hop must be in 1..=frame_len".into(),
        ));
    }
    if clip.len() < frame_len {
        return Err(Error::ClipTooShort {
            len: clip.len(),
            needed: frame_len,
        });
    }
    let n_frames = 1 + (clip.len() - frame_len) / hop;
    let n_bins = frame_len / 2 + 1;
    let rate = clip.sample_rate as f64;
    let window = hann(frame_len);
    let plan = FftPlan::new(frame_len);
    let mut power = Vec::with_capacity(n_frames * n_bins);
    let mut buf = vec![Complex64::new(0.0, 0.0); frame_len];
    for t in 0..n_frames {
        let frame = &clip.samples[t * hop..t * hop + frame_len];
        for ((b, x), w) in buf.iter_mut().zip(frame).zip(&window) {
            *b = Complex64::new(x * w, 0.0);
        }
        plan.forward(&mut buf);
        power.extend(buf[..n_bins].iter().map(|c| c.norm_sqr()));
    }
    let bin_freqs = (0..n_bins)
        .map(|i| i as f64 * rate / frame_len as f64)
        .collect();
    Ok(Spectrogram {
        power,
        n_frames,
        bin_freqs,
        frame_rate: rate / hop as f64,
    })
}

/// STFT with the default 1024/512 layout.
pub fn default_stft(clip: &AudioClip) -> Result<Spectrogram> {
    stft_power(clip, DEFAULT_FRAME_LEN, DEFAULT_HOP)
}

/// Usable Bark bands for a given Nyquist frequency.
pub fn bark_bands(nyquist: f64) -> Vec<(f64, f64)> {
    BARK_EDGES
        .windows(2)
        .filter(|w| w[0] < nyquist)
        .map(|w| (w[0], w[1].min(nyquist)))
        .collect()
}

fn in_band(f: f64, lo: f64, hi: f64, nyquist: f64) -> bool {
    (f >= lo && f < hi) || (hi == nyquist && f == nyquist)
}

/// Group STFT bins into Bark bands; each band power is the mean of its
/// member-bin powers.
pub fn bark_band_powers(spec: &Spectrogram) -> BarkBandPowers {
    let nyquist = spec.nyquist();
    let edges = bark_bands(nyquist);
    let membership: Vec<Option<usize>> = spec
        .bin_freqs
        .iter()
        .map(|&f| {
            edges
                .iter()
                .position(|&(lo, hi)| in_band(f, lo, hi, nyquist))
        })
        .collect();
    let mut bin_counts = vec![0usize; edges.len()];
    for z in membership.iter().flatten() {
        bin_counts[*z] += 1;
    }
    let frames = spec
        .frames()
        .map(|frame| {
            let mut sums = vec![0.0; edges.len()];
            for (p, z) in frame.iter().zip(&membership) {
                if let Some(z) = z {
                    sums[*z] += p;
                }
            }
            sums.iter()
                .zip(&bin_counts)
                .map(|(s, &c)| if c == 0 { 0.0 } else { s / c as f64 })
                .collect()
        })
        .collect();
    BarkBandPowers {
        edges,
        bin_counts,
        frames,
    }
}

/// Full-signal spectrum shared by several band envelope extractions.
#[derive(Debug, Clone)]
pub struct SignalSpectrum {
    plan: FftPlan,
    spectrum: Vec<Complex64>,
    sample_rate: f64,
}

impl SignalSpectrum {
    pub fn new(clip: &AudioClip) -> Self {
        let plan = FftPlan::new(clip.len());
        let spectrum = real_spectrum(&plan, clip.samples());
        Self {
            plan,
            spectrum,
            sample_rate: clip.sample_rate as f64,
        }
    }

    pub fn plan(&self) -> &FftPlan {
        &self.plan
    }

    /// Magnitude of the analytic signal of the `[lo, hi)` band.
    pub fn band_envelope(&self, lo: f64, hi: f64) -> Result<Vec<f64>> {
        let n = self.spectrum.len();
        let nyquist = self.sample_rate / 2.0;
        if !(lo > 0.0 && lo < hi && hi <= nyquist) {
            return Err(Error::InvalidParameter(
                "band edges must satisfy 0 < lo < hi <= Nyquist".into(),
            ));
        }
        let mut buf = vec![Complex64::new(0.0, 0.0); n];
        let mut any = false;
        for (k, (slot, bin)) in buf
            .iter_mut()
            .zip(&self.spectrum)
            .enumerate()
            .take(n / 2 + 1)
        {
            let f = k as f64 * self.sample_rate / n as f64;
            if !in_band(f, lo, hi, nyquist) {
                continue;
            }
            any = true;
            // DC and an exact Nyquist bin have no negative-frequency twin.
            let weight = if k == 0 || 2 * k == n { 1.0 } else { 2.0 };
            *slot = bin * weight;
        }
        if !any {
            return Err(Error::EmptyBand { lo, hi });
        }
        self.plan.inverse(&mut buf);
        let scale = 1.0 / n as f64;
        Ok(buf.iter().map(|c| c.norm() * scale).collect())
    }
}

/// Analytic envelope of the clip inside each band.
pub fn band_envelopes(clip: &AudioClip, band_edges: &[(f64, f64)]) -> Result<BandDecomposition> {
    let spectrum = SignalSpectrum::new(clip);
    let band_envelopes = band_edges
        .iter()
        .map(|&(lo, hi)| spectrum.band_envelope(lo, hi))
        .collect::<Result<Vec<_>>>()?;
    Ok(BandDecomposition {
        band_edges: band_edges.to_vec(),
        band_envelopes,
    })
}
