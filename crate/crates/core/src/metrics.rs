//! Time-domain quality metrics, magnitude error, and PESQ normalization.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::spectral::{ComplexSpectrogram, Waveform};

/// Lower clamp for SegSNR and SiSNR, dB.
pub const SNR_FLOOR_DB: f64 = -10.0;
/// Upper clamp for SegSNR and SiSNR, dB.
pub const SNR_CEIL_DB: f64 = 35.0;
/// Frames whose reference energy is at or below this are skipped by SegSNR.
pub const SILENT_FRAME_ENERGY: f64 = 1e-10;
pub const DEFAULT_SEGSNR_FRAME_MS: f64 = 32.0;

pub const PESQ_MIN: f64 = -0.5;
pub const PESQ_MAX: f64 = 4.5;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub segsnr_db: f64,
    pub sisnr_db: f64,
    pub mag_rel_err: f64,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub pesq_raw: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub q_pesq: Option<f64>,
}

impl MetricsReport {
    /// Attaches an externally computed PESQ score and its normalized form.
    pub fn with_pesq(mut self, pesq: f64) -> Result<Self> {
        self.q_pesq = Some(normalize_pesq(pesq)?);
        self.pesq_raw = Some(pesq);
        Ok(self)
    }
}

fn clamp_db(v: f64) -> f64 {
    if v.is_nan() {
        SNR_FLOOR_DB
    } else {
        v.clamp(SNR_FLOOR_DB, SNR_CEIL_DB)
    }
}

fn ratio_db(signal: f64, noise: f64) -> f64 {
    if noise == 0.0 {
        if signal > 0.0 {
            SNR_CEIL_DB
        } else {
            SNR_FLOOR_DB
        }
    } else {
        clamp_db(10.0 * (signal / noise).log10())
    }
}

fn check_lengths<T: Scalar>(a: &Waveform<T>, b: &Waveform<T>) -> Result<()> {
    if a.len() != b.len() {
        return Err(Error::LengthMismatch {
            left: a.len(),
            right: b.len(),
        });
    }
    Ok(())
}

/// Segmental SNR over non-overlapping frames of `frame_ms`, each frame
/// clamped to `[-10, 35]` dB before averaging. Silent reference frames are
/// skipped; a trailing partial frame counts as a frame.
pub fn segsnr<T: Scalar>(reference: &Waveform<T>, estimate: &Waveform<T>, frame_ms: f64) -> Result<f64> {
    check_lengths(reference, estimate)?;
    if frame_ms.is_nan() || frame_ms <= 0.0 {
        return Err(Error::OutOfRange {
            what: "frame_ms",
            value: frame_ms,
        });
    }
    let frame = ((frame_ms * 1e-3 * reference.sample_rate() as f64).round() as usize).max(1);
    let mut total = 0.0;
    let mut count = 0usize;
    for (r, e) in reference
        .samples()
        .chunks(frame)
        .zip(estimate.samples().chunks(frame))
    {
        let signal: f64 = r.iter().map(|v| v.as_f64().powi(2)).sum();
        if signal <= SILENT_FRAME_ENERGY {
            continue;
        }
        let noise: f64 = r
            .iter()
            .zip(e)
            .map(|(a, b)| (a.as_f64() - b.as_f64()).powi(2))
            .sum();
        total += ratio_db(signal, noise);
        count += 1;
    }
    if count == 0 {
        return Err(Error::SilentReference);
    }
    Ok(total / count as f64)
}

/// Scale-invariant SNR of zero-mean versions of both signals, clamped to
/// `[-10, 35]` dB.
pub fn sisnr<T: Scalar>(reference: &Waveform<T>, estimate: &Waveform<T>) -> Result<f64> {
    check_lengths(reference, estimate)?;
    let n = reference.len() as f64;
    let mean_r = reference.samples().iter().map(|v| v.as_f64()).sum::<f64>() / n;
    let mean_e = estimate.samples().iter().map(|v| v.as_f64()).sum::<f64>() / n;
    let r: Vec<f64> = reference.samples().iter().map(|v| v.as_f64() - mean_r).collect();
    let e: Vec<f64> = estimate.samples().iter().map(|v| v.as_f64() - mean_e).collect();
    let ref_energy: f64 = r.iter().map(|v| v * v).sum();
    if ref_energy <= SILENT_FRAME_ENERGY {
        return Err(Error::SilentReference);
    }
    let dot: f64 = r.iter().zip(&e).map(|(a, b)| a * b).sum();
    let scale = dot / ref_energy;
    let target: f64 = ref_energy * scale * scale;
    let noise: f64 = r
        .iter()
        .zip(&e)
        .map(|(a, b)| (b - scale * a).powi(2))
        .sum();
    if target == 0.0 {
        return Ok(SNR_FLOOR_DB);
    }
    Ok(ratio_db(target, noise))
}

/// `‖|a| - |b|‖_F / max(‖|a|‖_F, 1e-12)`.
pub fn mag_spec_rel_err<T: Scalar>(a: &ComplexSpectrogram<T>, b: &ComplexSpectrogram<T>) -> Result<f64> {
    if a.dim() != b.dim() {
        return Err(Error::ShapeMismatch {
            expected: a.dim(),
            found: b.dim(),
        });
    }
    let mut diff = 0.0;
    let mut norm = 0.0;
    for (x, y) in a.data().iter().zip(b.data()) {
        let (ma, mb) = (x.norm().as_f64(), y.norm().as_f64());
        diff += (ma - mb).powi(2);
        norm += ma * ma;
    }
    Ok(diff.sqrt() / norm.sqrt().max(1e-12))
}

/// Maps a raw PESQ score in `[-0.5, 4.5]` to the discriminator target `(pesq - 1) / 3.65`.
pub fn normalize_pesq(pesq: f64) -> Result<f64> {
    if !(PESQ_MIN..=PESQ_MAX).contains(&pesq) {
        return Err(Error::OutOfRange {
            what: "PESQ score",
            value: pesq,
        });
    }
    Ok((pesq - 1.0) / 3.65)
}

/// Parses `clip_id,score` lines. Blank lines are ignored.
pub fn parse_pesq_scores(text: &str) -> Result<BTreeMap<String, f64>> {
    let mut out = BTreeMap::new();
    for (i, raw) in text.lines().enumerate() {
        let line_no = i + 1;
        let line = raw.trim();
        if line.is_empty() {
            continue;
        }
        let parse_err = |message: String| Error::Parse {
            line: line_no,
            message,
        };
        let (id, score) = line
            .split_once(',')
            .ok_or_else(|| parse_err(format!("expected `clip_id,score`, got {line:?}")))?;
        let id = id.trim();
        if id.is_empty() {
            return Err(parse_err("empty clip id".into()));
        }
        let score: f64 = score
            .trim()
            .parse()
            .map_err(|e| parse_err(format!("bad score {:?}: {e}", score.trim())))?;
        if !(PESQ_MIN..=PESQ_MAX).contains(&score) {
            return Err(parse_err(format!("score {score} outside [-0.5, 4.5]")));
        }
        if out.insert(id.to_string(), score).is_some() {
            return Err(parse_err(format!("duplicate clip id {id:?}")));
        }
    }
    Ok(out)
}

pub fn ingest_external_pesq(path: impl AsRef<Path>) -> Result<BTreeMap<String, f64>> {
    parse_pesq_scores(&std::fs::read_to_string(path)?)
}
