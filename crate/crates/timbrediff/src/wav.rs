//! WAV read and write for 16-bit PCM and 32-bit float.

use std::io;
use std::path::Path;

use hound::{SampleFormat, WavReader, WavSpec, WavWriter};
use timbrediff_core::signal::{resample, CANONICAL_RATE};
use timbrediff_core::AudioClip;

use crate::error::{Error, Result};
use crate::fsutil::atomic_write;

/// Sample encoding used when writing.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum WavEncoding {
    #[default]
    Pcm16,
    Float32,
}

fn map_hound(path: &Path, err: hound::Error) -> Error {
    match err {
        hound::Error::IoError(e) if e.kind() == io::ErrorKind::NotFound => {
            Error::MissingAudio(path.into())
        }
        hound::Error::IoError(e) if e.kind() == io::ErrorKind::UnexpectedEof => {
            Error::MalformedWav {
                path: path.into(),
                reason: "truncated file".into(),
            }
        }
        hound::Error::IoError(e) => Error::io(path, e),
        hound::Error::FormatError(reason) => Error::MalformedWav {
            path: path.into(),
            reason: reason.into(),
        },
        hound::Error::UnfinishedSample => Error::MalformedWav {
            path: path.into(),
            reason: "data chunk ends mid-sample".into(),
        },
        other => Error::UnsupportedCodec {
            path: path.into(),
            reason: other.to_string(),
        },
    }
}

/// Read a WAV file as mono samples at its native rate. Channels are
/// averaged; PCM values `v` map to `v / 32768`.
pub fn load_wav(path: &Path) -> Result<AudioClip> {
    if !path.exists() {
        return Err(Error::MissingAudio(path.into()));
    }
    let reader = WavReader::open(path).map_err(|e| map_hound(path, e))?;
    let spec = reader.spec();
    let interleaved: Vec<f64> = match (spec.sample_format, spec.bits_per_sample) {
        (SampleFormat::Int, 16) => reader
            .into_samples::<i16>()
            .map(|s| s.map(|v| v as f64 / 32768.0))
            .collect::<std::result::Result<_, _>>(),
        (SampleFormat::Float, 32) => reader
            .into_samples::<f32>()
            .map(|s| s.map(f64::from))
            .collect::<std::result::Result<_, _>>(),
        (format, bits) => {
            return Err(Error::UnsupportedCodec {
                path: path.into(),
                reason: format!("{bits}-bit {format:?} samples"),
            })
        }
    }
    .map_err(|e| map_hound(path, e))?;
    let channels = spec.channels as usize;
    let mono: Vec<f64> = if channels == 1 {
        interleaved
    } else {
        interleaved
            .chunks_exact(channels)
            .map(|frame| frame.iter().sum::<f64>() / channels as f64)
            .collect()
    };
    AudioClip::new(mono, spec.sample_rate).map_err(|e| Error::MalformedWav {
        path: path.into(),
        reason: e.to_string(),
    })
}

/// Read a WAV file and bring it to the canonical 16 kHz rate.
pub fn load_canonical(path: &Path) -> Result<AudioClip> {
    let clip = load_wav(path)?;
    if clip.sample_rate() == CANONICAL_RATE {
        Ok(clip)
    } else {
        Ok(resample(&clip, CANONICAL_RATE)?)
    }
}

/// Encode a mono clip as WAV bytes.
pub fn encode_wav(clip: &AudioClip, encoding: WavEncoding) -> Vec<u8> {
    let (bits, sample_format) = match encoding {
        WavEncoding::Pcm16 => (16, SampleFormat::Int),
        WavEncoding::Float32 => (32, SampleFormat::Float),
    };
    let spec = WavSpec {
        channels: 1,
        sample_rate: clip.sample_rate(),
        bits_per_sample: bits,
        sample_format,
    };
    let mut cursor = io::Cursor::new(Vec::new());
    {
        // writing into memory cannot fail
        let mut w = WavWriter::new(&mut cursor, spec).expect("in-memory WAV header");
        for &x in clip.samples() {
            match encoding {
                WavEncoding::Pcm16 => {
                    let v = (x * 32768.0).round().clamp(-32768.0, 32767.0) as i16;
                    w.write_sample(v).expect("in-memory WAV sample");
                }
                WavEncoding::Float32 => w.write_sample(x as f32).expect("in-memory WAV sample"),
            }
        }
        w.finalize().expect("in-memory WAV finalize");
    }
    cursor.into_inner()
}

pub fn save_wav(path: &Path, clip: &AudioClip, encoding: WavEncoding) -> Result<()> {
    atomic_write(path, &encode_wav(clip, encoding))
}
