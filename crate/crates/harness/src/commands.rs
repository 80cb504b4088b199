//! The batch commands behind the CLI. Each works on loaded clips and returns
//! its report so tests can drive it without a process boundary.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use anyhow::{bail, ensure, Context, Result};
use ndarray::Array3;
use rand::Rng;
use serde::{Deserialize, Serialize};
use upb_core::{
    assemble_disc_input, augment_spectrogram, biased_stft, clip_rng, composite, compress_magnitude,
    evaluate_terms, istft, mag_spec_rel_err, phase_of, segsnr, sisnr, stft, AugmentConfig,
    AugmentRecord, CompositeKind, LossTerms, LossWeights, StftConfig, Waveform,
    DEFAULT_SEGSNR_FRAME_MS,
};

use crate::abx::{trial_id, AbxManifest, AbxTrial, Order, MANIFEST_FILE};
use crate::corpus::Clip;
use crate::report::{write_json, ClipMetrics, MetricsSummary};
use crate::wav::write_wav_f32;

pub const SEED_ENV: &str = "UPB_SEED";

/// `UPB_SEED`, when set, wins over the command-line seed.
pub fn resolve_seed(cli: Option<u64>, env: Option<&str>) -> Result<Option<u64>> {
    match env.map(str::trim).filter(|s| !s.is_empty()) {
        Some(s) => Ok(Some(
            s.parse()
                .with_context(|| format!("{SEED_ENV}={s:?} is not an unsigned integer"))?,
        )),
        None => Ok(cli),
    }
}

/// Uniform angle in `[-π, π)`.
pub fn draw_theta<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    use std::f64::consts::PI;
    let theta = -PI + 2.0 * PI * rng.random::<f64>();
    if theta >= PI {
        -PI
    } else {
        theta
    }
}

fn config_for(cfg: &StftConfig, wave: &Waveform<f64>) -> Result<StftConfig> {
    Ok(cfg.with_sample_rate(wave.sample_rate())?)
}

fn quality(clip_id: &str, reference: &Waveform<f64>, estimate: &Waveform<f64>) -> Result<ClipMetrics> {
    let ctx = || format!("clip {clip_id}");
    Ok(ClipMetrics {
        clip_id: clip_id.to_string(),
        segsnr_db: segsnr(reference, estimate, DEFAULT_SEGSNR_FRAME_MS).with_context(ctx)?,
        sisnr_db: sisnr(reference, estimate).with_context(ctx)?,
        mag_rel_err: None,
        theta: None,
        pesq_raw: None,
        q_pesq: None,
    })
}

/// Unbiased analysis/synthesis of every clip.
pub fn roundtrip(clips: &[Clip], cfg: &StftConfig) -> Result<MetricsSummary> {
    let mut rows = Vec::with_capacity(clips.len());
    for clip in clips {
        let c = config_for(cfg, &clip.wave)?;
        let y = istft(&stft(&clip.wave, &c)?)?;
        rows.push(quality(&clip.entry.clip_id, &clip.wave, &y)?);
    }
    Ok(MetricsSummary::new("Unbiased", rows))
}

/// Globally biased reconstruction of every clip. θ for clip `i` comes from
/// `clip_rng(seed, i)` unless `theta` forces one value for all clips.
pub fn bias(
    clips: &[Clip],
    cfg: &StftConfig,
    seed: u64,
    theta: Option<f64>,
    out_dir: Option<&Path>,
) -> Result<MetricsSummary> {
    let mut rows = Vec::with_capacity(clips.len());
    for (i, clip) in clips.iter().enumerate() {
        let id = &clip.entry.clip_id;
        let theta = theta.unwrap_or_else(|| draw_theta(&mut clip_rng(seed, i as u64)));
        let c = config_for(cfg, &clip.wave)?;
        let clean = stft(&clip.wave, &c)?;
        let biased = biased_stft(&clip.wave, &c, theta)?;
        let y = istft(&biased)?;
        if let Some(dir) = out_dir {
            write_wav_f32(&dir.join(format!("{id}.wav")), &y)?;
        }
        let mut m = quality(id, &clip.wave, &y)?;
        m.mag_rel_err = Some(mag_spec_rel_err(&clean, &biased)?);
        m.theta = Some(theta);
        rows.push(m);
    }
    Ok(MetricsSummary::new("Biased", rows))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LossOutcome {
    pub terms: LossTerms<f64>,
    /// `None` when a composite needs a term that was not supplied.
    pub composites: BTreeMap<String, Option<f64>>,
}

impl LossOutcome {
    pub fn text(&self) -> String {
        let t = &self.terms;
        let cell = |v: Option<f64>| v.map_or_else(|| "n/a".to_string(), |v| format!("{v:.6e}"));
        let mut out = String::new();
        for (name, v) in [
            ("mag", t.mag),
            ("ri", t.ri),
            ("time", t.time),
            ("adv", t.adv),
            ("upb", t.upb),
            ("wupb", t.wupb),
            ("upb_adv", t.upb_adv),
        ] {
            let _ = writeln!(out, "{name:<8} {:>14}", cell(v));
        }
        out.push('\n');
        for kind in CompositeKind::ALL {
            let _ = writeln!(out, "{:<8} {:>14}", kind.name(), cell(self.composites[kind.name()]));
        }
        out
    }
}

/// Every loss term and composite for an estimate against its clean reference.
pub fn loss(
    clean: &Waveform<f64>,
    estimate: &Waveform<f64>,
    cfg: &StftConfig,
    weights: &LossWeights<f64>,
    adv_scores: Option<&[f64]>,
    upb_adv_scores: Option<&[f64]>,
) -> Result<LossOutcome> {
    weights.validate()?;
    ensure!(
        clean.sample_rate() == estimate.sample_rate(),
        "sample rates differ: {} Hz vs {} Hz",
        clean.sample_rate(),
        estimate.sample_rate()
    );
    ensure!(
        clean.len() == estimate.len(),
        "durations differ: {} vs {} samples",
        clean.len(),
        estimate.len()
    );
    let c = config_for(cfg, clean)?;
    let cs = stft(clean, &c)?;
    let es = stft(estimate, &c)?;
    let terms = evaluate_terms(clean, estimate, &cs, &es, weights.c, adv_scores, upb_adv_scores)?;
    let composites = CompositeKind::ALL
        .iter()
        .map(|k| (k.name().to_string(), composite(*k, &terms, weights).ok().map(|r| r.value)))
        .collect();
    Ok(LossOutcome { terms, composites })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AugmentedClip {
    pub clip_id: String,
    /// File name of the augmented audio, relative to the output directory.
    pub output: String,
    #[serde(flatten)]
    pub record: AugmentRecord<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AugmentSummary {
    pub config: AugmentConfig,
    pub clips: usize,
    pub applied_global: f64,
    pub applied_linear: f64,
    pub applied_magnoise: f64,
}

/// Augments every clip with `clip_rng(config.rng_seed, i)`, writing
/// `<clip_id>.wav`, `<clip_id>.json` and `summary.json` into `out_dir`.
/// Clips left untouched by every gate are copied byte for byte.
pub fn augment(clips: &[Clip], cfg: &StftConfig, config: &AugmentConfig, out_dir: &Path) -> Result<AugmentSummary> {
    config.validate()?;
    ensure!(!clips.is_empty(), "empty corpus");
    let (mut g, mut l, mut m) = (0usize, 0usize, 0usize);
    for (i, clip) in clips.iter().enumerate() {
        let id = &clip.entry.clip_id;
        let file_name = format!("{id}.wav");
        let out = out_dir.join(&file_name);
        let mut rng = clip_rng(config.rng_seed, i as u64);
        let spec = stft(&clip.wave, &config_for(cfg, &clip.wave)?)?;
        let (augmented, record) = augment_spectrogram(&spec, config, &mut rng)?;
        if record.is_identity() {
            std::fs::copy(&clip.entry.path, &out)
                .with_context(|| format!("copying {}", clip.entry.path.display()))?;
        } else {
            write_wav_f32(&out, &istft(&augmented)?)?;
        }
        g += record.applied_global as usize;
        l += record.applied_linear as usize;
        m += record.applied_magnoise as usize;
        let entry = AugmentedClip {
            clip_id: id.clone(),
            output: file_name,
            record,
        };
        write_json(&out_dir.join(format!("{id}.json")), &entry)?;
    }
    let n = clips.len() as f64;
    let summary = AugmentSummary {
        config: *config,
        clips: clips.len(),
        applied_global: g as f64 / n,
        applied_linear: l as f64 / n,
        applied_magnoise: m as f64 / n,
    };
    write_json(&out_dir.join("summary.json"), &summary)?;
    Ok(summary)
}

/// Builds an ABX session: trial `i` uses clip `i mod len`, a random θ and a
/// random presentation order, all drawn from `clip_rng(seed, i)`.
pub fn abx_gen(clips: &[Clip], cfg: &StftConfig, n_trials: usize, seed: u64, out_dir: &Path) -> Result<AbxManifest> {
    if n_trials < 1 {
        bail!("n_trials must be at least 1");
    }
    ensure!(!clips.is_empty(), "empty corpus");
    let mut trials = Vec::with_capacity(n_trials);
    for i in 0..n_trials {
        let clip = &clips[i % clips.len()];
        let mut rng = clip_rng(seed, i as u64);
        let theta = draw_theta(&mut rng);
        let order = if rng.random::<bool>() {
            Order::BiasedFirst
        } else {
            Order::UnbiasedFirst
        };
        let c = config_for(cfg, &clip.wave)?;
        let unbiased = istft(&stft(&clip.wave, &c)?)?;
        let biased = istft(&biased_stft(&clip.wave, &c, theta)?)?;
        let (a, b) = match order {
            Order::UnbiasedFirst => (&unbiased, &biased),
            Order::BiasedFirst => (&biased, &unbiased),
        };
        let id = trial_id(i);
        let dir = out_dir.join("trials").join(&id);
        std::fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
        write_wav_f32(&dir.join("x.wav"), &clip.wave)?;
        write_wav_f32(&dir.join("a.wav"), a)?;
        write_wav_f32(&dir.join("b.wav"), b)?;
        trials.push(AbxTrial {
            trial_id: id,
            clip_id: clip.entry.clip_id.clone(),
            order,
            theta_used: theta,
            response: None,
            correct: None,
        });
    }
    let manifest = AbxManifest { seed, trials };
    write_json(&out_dir.join(MANIFEST_FILE), &manifest)?;
    Ok(manifest)
}

/// The `3×T×F` discriminator input of a waveform: padded TPD, padded FPD and
/// the power-compressed magnitude.
pub fn disc_input(wave: &Waveform<f64>, cfg: &StftConfig, c: f64) -> Result<Array3<f64>> {
    let spec = stft(wave, &config_for(cfg, wave)?)?;
    let mag = compress_magnitude(&spec, c)?;
    Ok(assemble_disc_input(&phase_of(&spec), &mag)?.channels)
}

pub fn read_scores(path: &Path) -> Result<Vec<f64>> {
    let scores: Vec<f64> = crate::report::read_json(path)?;
    ensure!(!scores.is_empty(), "{}: no scores", path.display());
    Ok(scores)
}
