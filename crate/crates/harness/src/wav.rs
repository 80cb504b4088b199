//! Mono WAV input (16-bit PCM or 32-bit float) and 32-bit float output.

use std::path::Path;

use hound::{SampleFormat, WavReader, WavSpec, WavWriter};
use thiserror::Error;
use upb_core::Waveform;

#[derive(Debug, Error)]
pub enum WavError {
    #[error("{path}: {source}")]
    Hound {
        path: String,
        #[source]
        source: hound::Error,
    },
    #[error("{path}: {channels} channels, only mono is supported")]
    NotMono { path: String, channels: u16 },
    #[error("{path}: unsupported sample format ({bits}-bit {format:?})")]
    UnsupportedFormat {
        path: String,
        bits: u16,
        format: SampleFormat,
    },
    #[error("{path}: {source}")]
    Signal {
        path: String,
        #[source]
        source: upb_core::Error,
    },
}

fn hound_err(path: &Path) -> impl FnOnce(hound::Error) -> WavError + '_ {
    move |source| WavError::Hound {
        path: path.display().to_string(),
        source,
    }
}

pub fn read_wav(path: &Path) -> Result<Waveform<f64>, WavError> {
    let reader = WavReader::open(path).map_err(hound_err(path))?;
    let spec = reader.spec();
    if spec.channels != 1 {
        return Err(WavError::NotMono {
            path: path.display().to_string(),
            channels: spec.channels,
        });
    }
    let samples: Vec<f64> = match (spec.sample_format, spec.bits_per_sample) {
        (SampleFormat::Int, 16) => reader
            .into_samples::<i16>()
            .map(|s| s.map(|v| v as f64 / 32768.0))
            .collect::<Result<_, _>>()
            .map_err(hound_err(path))?,
        (SampleFormat::Float, 32) => reader
            .into_samples::<f32>()
            .map(|s| s.map(f64::from))
            .collect::<Result<_, _>>()
            .map_err(hound_err(path))?,
        (format, bits) => {
            return Err(WavError::UnsupportedFormat {
                path: path.display().to_string(),
                bits,
                format,
            })
        }
    };
    Waveform::new(samples, spec.sample_rate).map_err(|source| WavError::Signal {
        path: path.display().to_string(),
        source,
    })
}

/// Writes 32-bit float mono. Samples are not clipped.
pub fn write_wav_f32(path: &Path, wave: &Waveform<f64>) -> Result<(), WavError> {
    let spec = WavSpec {
        channels: 1,
        sample_rate: wave.sample_rate(),
        bits_per_sample: 32,
        sample_format: SampleFormat::Float,
    };
    let mut w = WavWriter::create(path, spec).map_err(hound_err(path))?;
    for s in wave.samples() {
        w.write_sample(*s as f32).map_err(hound_err(path))?;
    }
    w.finalize().map_err(hound_err(path))
}

/// Writes 16-bit PCM mono, clipping to [-1, 1).
pub fn write_wav_pcm16(path: &Path, wave: &Waveform<f64>) -> Result<(), WavError> {
    let spec = WavSpec {
        channels: 1,
        sample_rate: wave.sample_rate(),
        bits_per_sample: 16,
        sample_format: SampleFormat::Int,
    };
    let mut w = WavWriter::create(path, spec).map_err(hound_err(path))?;
    for s in wave.samples() {
        let v = (s * 32768.0).round().clamp(-32768.0, 32767.0) as i16;
        w.write_sample(v).map_err(hound_err(path))?;
    }
    w.finalize().map_err(hound_err(path))
}

/// Float samples that went through `write_wav_f32`.
pub fn quantize_f32(wave: &Waveform<f64>) -> Waveform<f64> {
    Waveform::new(
        wave.samples().iter().map(|v| *v as f32 as f64).collect(),
        wave.sample_rate(),
    )
    .expect("finite samples stay finite")
}
