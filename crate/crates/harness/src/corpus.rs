use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use log::warn;
use serde::Serialize;
use upb_core::Waveform;

use crate::wav::read_wav;

pub const DEFAULT_SAMPLE_RATE: u32 = 16_000;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClipEntry {
    pub clip_id: String,
    pub path: PathBuf,
    pub duration: f64,
    pub sample_rate: u32,
}

pub struct Clip {
    pub entry: ClipEntry,
    pub wave: Waveform<f64>,
}

/// `*.wav` files directly under `dir`, sorted by file name.
pub fn wav_paths(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut paths: Vec<PathBuf> = std::fs::read_dir(dir)
        .with_context(|| format!("reading corpus directory {}", dir.display()))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| {
            p.is_file()
                && p.extension()
                    .is_some_and(|e| e.eq_ignore_ascii_case("wav"))
        })
        .collect();
    paths.sort();
    Ok(paths)
}

/// Loads every readable mono WAV. Unreadable files are skipped with a
/// warning; an empty result is an error.
pub fn load_corpus(dir: &Path, allow_any_rate: bool) -> Result<Vec<Clip>> {
    let mut clips = Vec::new();
    let mut ids = BTreeSet::new();
    for path in wav_paths(dir)? {
        let wave = match read_wav(&path) {
            Ok(w) => w,
            Err(e) => {
                warn!("skipping {e}");
                continue;
            }
        };
        if !allow_any_rate && wave.sample_rate() != DEFAULT_SAMPLE_RATE {
            warn!(
                "skipping {}: sample rate {} Hz (expected {DEFAULT_SAMPLE_RATE}, pass --allow-any-rate to accept)",
                path.display(),
                wave.sample_rate()
            );
            continue;
        }
        let clip_id = path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_default();
        if !ids.insert(clip_id.clone()) {
            bail!("duplicate clip id {clip_id:?} in {}", dir.display());
        }
        clips.push(Clip {
            entry: ClipEntry {
                clip_id,
                path,
                duration: wave.duration_secs(),
                sample_rate: wave.sample_rate(),
            },
            wave,
        });
    }
    if clips.is_empty() {
        bail!("no readable WAV files in {}", dir.display());
    }
    Ok(clips)
}
