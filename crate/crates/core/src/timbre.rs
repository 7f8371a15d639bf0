//! The five timbre metrics.
//!
//! Each metric is a ratio of spectral quantities, so every value is
//! invariant to the overall gain of the clip. Loudness-weighted metrics use a
//! compressive specific loudness `N'(z) = p_z^0.23` on time-averaged Bark band
//! powers.

use alloc::vec::Vec;
use core::fmt;

use crate::error::{Error, Result};
use crate::signal::{
    bark_band_powers, default_stft, AudioClip, BarkBandPowers, SignalSpectrum, Spectrogram,
};

/// Stevens-law exponent for specific loudness.
pub const LOUDNESS_EXPONENT: f64 = 0.23;
/// Total framed power at or below this is treated as silence.
pub const SILENCE_THRESHOLD: f64 = 1e-10;
/// Upper edge of Bark band 3; bands at or below it count as "boom".
pub const BOOM_EDGE_HZ: f64 = 300.0;
pub const DEPTH_EDGE_HZ: f64 = 200.0;
pub const MODULATION_BAND_HZ: (f64, f64) = (30.0, 150.0);
pub const MIN_ROUGHNESS_SECONDS: f64 = 0.25;

/// The predefined timbre attributes, in their canonical order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "lowercase"))]
pub enum TimbreAttribute {
    /// Sharp or shrill sensation.
    Sharpness,
    /// Buzzing, harsh, raspy quality.
    Roughness,
    /// Low-pitched booming vibration.
    Boominess,
    /// Bright sensation.
    Brightness,
    /// Emphasized low-frequency component.
    Depth,
}

impl TimbreAttribute {
    pub const COUNT: usize = 5;
    pub const ALL: [TimbreAttribute; 5] = [
        TimbreAttribute::Sharpness,
        TimbreAttribute::Roughness,
        TimbreAttribute::Boominess,
        TimbreAttribute::Brightness,
        TimbreAttribute::Depth,
    ];

    /// Zero-based position in [`TimbreAttribute::ALL`].
    pub fn index(self) -> usize {
        self as usize
    }

    pub fn name(self) -> &'static str {
        match self {
            TimbreAttribute::Sharpness => "sharpness",
            TimbreAttribute::Roughness => "roughness",
            TimbreAttribute::Boominess => "boominess",
            TimbreAttribute::Brightness => "brightness",
            TimbreAttribute::Depth => "depth",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|a| a.name() == name)
    }
}

impl fmt::Display for TimbreAttribute {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Metric values for one clip, indexed by [`TimbreAttribute`].
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct TimbreVector {
    values: [f64; 5],
}

impl TimbreVector {
    pub fn new(values: [f64; 5]) -> Result<Self> {
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite);
        }
        Ok(Self { values })
    }

    pub fn get(&self, attr: TimbreAttribute) -> f64 {
        self.values[attr.index()]
    }

    pub fn values(&self) -> &[f64; 5] {
        &self.values
    }
}

fn check_audible(spec: &Spectrogram) -> Result<()> {
    if spec.total_power() > SILENCE_THRESHOLD {
        Ok(())
    } else {
        Err(Error::SilentInput)
    }
}

pub fn specific_loudness(band_powers: &[f64]) -> Vec<f64> {
    band_powers
        .iter()
        .map(|&p| {
            if p > 0.0 {
                libm::pow(p, LOUDNESS_EXPONENT)
            } else {
                0.0
            }
        })
        .collect()
}

/// Sharpness weighting over the 1-based band number `z`.
pub fn sharpness_weight(z: usize) -> f64 {
    if z <= 14 {
        1.0
    } else {
        libm::exp(0.171 * (z as f64 - 14.0))
    }
}

/// Loudness-weighted mean of `g(z) * z` over time-averaged band powers.
pub fn sharpness_from_band_powers(band_powers: &[f64]) -> Result<f64> {
    let loudness = specific_loudness(band_powers);
    let total: f64 = loudness.iter().sum();
    if total <= 0.0 {
        return Err(Error::SilentInput);
    }
    let weighted: f64 = loudness
        .iter()
        .enumerate()
        .map(|(i, n)| {
            let z = i + 1;
            n * sharpness_weight(z) * z as f64
        })
        .sum();
    Ok(weighted / total)
}

/// Share of specific loudness in the bands lying below 300 Hz.
pub fn boominess_from_band_powers(edges: &[(f64, f64)], band_powers: &[f64]) -> Result<f64> {
    let loudness = specific_loudness(band_powers);
    let total: f64 = loudness.iter().sum();
    if total <= 0.0 {
        return Err(Error::SilentInput);
    }
    let low: f64 = loudness
        .iter()
        .zip(edges)
        .filter(|(_, &(_, hi))| hi <= BOOM_EDGE_HZ)
        .map(|(n, _)| n)
        .sum();
    Ok(low / total)
}

/// Energy-weighted mean spectral centroid in Hz.
pub fn brightness_from_spectrogram(spec: &Spectrogram) -> Result<f64> {
    check_audible(spec)?;
    let (mut weighted, mut total) = (0.0, 0.0);
    for frame in spec.frames() {
        let power: f64 = frame.iter().sum();
        if power <= 0.0 {
            continue;
        }
        let centroid = frame
            .iter()
            .zip(spec.bin_freqs())
            .map(|(p, f)| p * f)
            .sum::<f64>()
            / power;
        weighted += power * centroid;
        total += power;
    }
    Ok(weighted / total)
}

/// Energy-weighted fraction of power below 200 Hz.
pub fn depth_from_spectrogram(spec: &Spectrogram) -> Result<f64> {
    check_audible(spec)?;
    let (mut weighted, mut total) = (0.0, 0.0);
    for frame in spec.frames() {
        let power: f64 = frame.iter().sum();
        if power <= 0.0 {
            continue;
        }
        let low: f64 = frame
            .iter()
            .zip(spec.bin_freqs())
            .filter(|(_, &f)| f < DEPTH_EDGE_HZ)
            .map(|(p, _)| p)
            .sum();
        weighted += power * (low / power);
        total += power;
    }
    Ok(weighted / total)
}

/// RMS of the 30-150 Hz part of an envelope over its mean.
fn modulation_index(plan: &crate::fft::FftPlan, envelope: &[f64], sample_rate: f64) -> f64 {
    let n = envelope.len();
    let mean = envelope.iter().sum::<f64>() / n as f64;
    let spectrum = crate::fft::real_spectrum(plan, envelope);
    let (lo, hi) = MODULATION_BAND_HZ;
    let mut energy = 0.0;
    for (k, c) in spectrum.iter().enumerate().take(n / 2 + 1).skip(1) {
        let f = k as f64 * sample_rate / n as f64;
        if f < lo || f > hi {
            continue;
        }
        let twin = if 2 * k == n { 1.0 } else { 2.0 };
        energy += twin * c.norm_sqr();
    }
    // Parseval: mean square of the band-passed envelope.
    let rms = libm::sqrt(energy) / n as f64;
    rms / (mean + 1e-12)
}

/// Loudness-weighted mean envelope modulation index over Bark bands.
pub fn roughness_with_bands(clip: &AudioClip, bands: &BarkBandPowers) -> Result<f64> {
    let needed = libm::ceil(MIN_ROUGHNESS_SECONDS * clip.sample_rate() as f64) as usize;
    if clip.len() < needed {
        return Err(Error::ClipTooShort {
            len: clip.len(),
            needed,
        });
    }
    let loudness = specific_loudness(&bands.time_average());
    let total: f64 = loudness.iter().sum();
    if total <= 0.0 {
        return Err(Error::SilentInput);
    }
    let spectrum = SignalSpectrum::new(clip);
    let plan = spectrum.plan();
    let rate = clip.sample_rate() as f64;
    let mut weighted = 0.0;
    for (&(lo, hi), n) in bands.edges.iter().zip(&loudness) {
        if *n == 0.0 {
            continue;
        }
        let envelope = match spectrum.band_envelope(lo, hi) {
            Ok(env) => env,
            // a band too narrow for this clip length carries no modulation
            Err(Error::EmptyBand { .. }) => continue,
            Err(e) => return Err(e),
        };
        weighted += n * modulation_index(plan, &envelope, rate);
    }
    Ok(weighted / total)
}

fn analyse(clip: &AudioClip) -> Result<(Spectrogram, BarkBandPowers)> {
    let spec = default_stft(clip)?;
    check_audible(&spec)?;
    let bands = bark_band_powers(&spec);
    Ok((spec, bands))
}

pub fn brightness(clip: &AudioClip) -> Result<f64> {
    brightness_from_spectrogram(&default_stft(clip)?)
}

pub fn depth(clip: &AudioClip) -> Result<f64> {
    depth_from_spectrogram(&default_stft(clip)?)
}

pub fn sharpness(clip: &AudioClip) -> Result<f64> {
    let (_, bands) = analyse(clip)?;
    sharpness_from_band_powers(&bands.time_average())
}

pub fn boominess(clip: &AudioClip) -> Result<f64> {
    let (_, bands) = analyse(clip)?;
    boominess_from_band_powers(&bands.edges, &bands.time_average())
}

pub fn roughness(clip: &AudioClip) -> Result<f64> {
    let (_, bands) = analyse(clip)?;
    roughness_with_bands(clip, &bands)
}

/// All five metrics from a single STFT pass.
pub fn compute_timbre_vector(clip: &AudioClip) -> Result<TimbreVector> {
    let (spec, bands) = analyse(clip)?;
    let averaged = bands.time_average();
    let mut values = [0.0; 5];
    values[TimbreAttribute::Sharpness.index()] = sharpness_from_band_powers(&averaged)?;
    values[TimbreAttribute::Roughness.index()] = roughness_with_bands(clip, &bands)?;
    values[TimbreAttribute::Boominess.index()] =
        boominess_from_band_powers(&bands.edges, &averaged)?;
    values[TimbreAttribute::Brightness.index()] = brightness_from_spectrogram(&spec)?;
    values[TimbreAttribute::Depth.index()] = depth_from_spectrogram(&spec)?;
    TimbreVector::new(values)
}
