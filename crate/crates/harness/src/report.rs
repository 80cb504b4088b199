//! Per-clip metric reports: JSON for tools, a fixed-width table for people.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use anyhow::{Context, Result};
use serde::{Deserialize, Serialize};
use upb_core::normalize_pesq;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClipMetrics {
    pub clip_id: String,
    pub segsnr_db: f64,
    pub sisnr_db: f64,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub mag_rel_err: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub theta: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub pesq_raw: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub q_pesq: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsSummary {
    pub condition: String,
    pub clips: Vec<ClipMetrics>,
    pub mean_segsnr_db: f64,
    pub mean_sisnr_db: f64,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub mean_mag_rel_err: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub mean_pesq: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub mean_q_pesq: Option<f64>,
}

fn mean_of(values: impl Iterator<Item = Option<f64>>) -> Option<f64> {
    let v: Option<Vec<f64>> = values.collect();
    v.filter(|v| !v.is_empty())
        .map(|v| v.iter().sum::<f64>() / v.len() as f64)
}

impl MetricsSummary {
    pub fn new(condition: impl Into<String>, clips: Vec<ClipMetrics>) -> Self {
        let n = clips.len().max(1) as f64;
        MetricsSummary {
            condition: condition.into(),
            mean_segsnr_db: clips.iter().map(|c| c.segsnr_db).sum::<f64>() / n,
            mean_sisnr_db: clips.iter().map(|c| c.sisnr_db).sum::<f64>() / n,
            mean_mag_rel_err: mean_of(clips.iter().map(|c| c.mag_rel_err)),
            mean_pesq: mean_of(clips.iter().map(|c| c.pesq_raw)),
            mean_q_pesq: mean_of(clips.iter().map(|c| c.q_pesq)),
            clips,
        }
    }

    /// Attaches externally computed PESQ scores. Every clip must have one.
    pub fn with_pesq(self, scores: &BTreeMap<String, f64>) -> Result<Self> {
        let mut clips = self.clips;
        for c in &mut clips {
            let raw = *scores
                .get(&c.clip_id)
                .with_context(|| format!("no PESQ score for clip {:?}", c.clip_id))?;
            c.q_pesq = Some(normalize_pesq(raw)?);
            c.pesq_raw = Some(raw);
        }
        Ok(MetricsSummary::new(self.condition, clips))
    }

    pub fn table(&self) -> String {
        let pesq = self.mean_pesq.is_some();
        let mag = self.mean_mag_rel_err.is_some();
        let width = self
            .clips
            .iter()
            .map(|c| c.clip_id.len())
            .chain([self.condition.len(), 4])
            .max()
            .unwrap_or(4);
        let mut out = String::new();
        let mut header = format!("{:<width$}  {:>10}  {:>10}", "", "SegSNR", "SiSNR");
        if pesq {
            let _ = write!(header, "  {:>10}  {:>10}", "PESQ", "Q_PESQ");
        }
        if mag {
            let _ = write!(header, "  {:>11}", "MagRelErr");
        }
        let rule = "-".repeat(header.len());
        let row = |out: &mut String, label: &str, seg: f64, si: f64, p: Option<f64>, q: Option<f64>, m: Option<f64>| {
            let _ = write!(out, "{label:<width$}  {seg:>10.3}  {si:>10.3}");
            if pesq {
                let cell = |v: Option<f64>| v.map_or_else(|| "n/a".to_string(), |v| format!("{v:.3}"));
                let _ = write!(out, "  {:>10}  {:>10}", cell(p), cell(q));
            }
            if mag {
                let _ = write!(out, "  {:>11.3e}", m.unwrap_or(f64::NAN));
            }
            out.push('\n');
        };
        out.push_str(header.trim_end());
        out.push('\n');
        out.push_str(&rule);
        out.push('\n');
        for c in &self.clips {
            row(&mut out, &c.clip_id, c.segsnr_db, c.sisnr_db, c.pesq_raw, c.q_pesq, c.mag_rel_err);
        }
        out.push_str(&rule);
        out.push('\n');
        row(
            &mut out,
            &self.condition,
            self.mean_segsnr_db,
            self.mean_sisnr_db,
            self.mean_pesq,
            self.mean_q_pesq,
            self.mean_mag_rel_err,
        );
        out
    }

    /// Writes `<stem>.json` and `<stem>.txt` into `dir`.
    pub fn write(&self, dir: &Path, stem: &str) -> Result<()> {
        write_json(&dir.join(format!("{stem}.json")), self)?;
        let txt = dir.join(format!("{stem}.txt"));
        std::fs::write(&txt, self.table()).with_context(|| format!("writing {}", txt.display()))
    }
}

pub fn write_json<S: Serialize + ?Sized>(path: &Path, value: &S) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    std::fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

pub fn read_json<D: serde::de::DeserializeOwned>(path: &Path) -> Result<D> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
}
