#![allow(dead_code)]

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use upb_harness::synth::speech_like;
use upb_harness::wav::write_wav_pcm16;

/// Writes `count` speech-like PCM16 clips named `clip_XXXX.wav`.
pub fn synth_corpus(dir: &Path, count: usize, seconds: f64, seed: u64) -> PathBuf {
    std::fs::create_dir_all(dir).unwrap();
    for i in 0..count {
        let w = speech_like(seconds, 16_000, seed + i as u64);
        write_wav_pcm16(&dir.join(format!("clip_{i:04}.wav")), &w).unwrap();
    }
    dir.to_path_buf()
}

pub fn upb(args: &[&str], envs: &[(&str, &str)]) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_upb"));
    cmd.args(args).env_remove("UPB_SEED").env("RUST_LOG", "warn");
    for (k, v) in envs {
        cmd.env(k, v);
    }
    cmd.output().expect("run upb")
}

pub fn upb_ok(args: &[&str]) -> String {
    let out = upb(args, &[]);
    assert!(
        out.status.success(),
        "upb {args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

pub fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}
