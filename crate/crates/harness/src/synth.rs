//! Deterministic speech-like test signals: a jittered harmonic source with
//! crude formant shaping, unvoiced noise bursts, and a syllable-rate envelope.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use upb_core::Waveform;

pub fn speech_like(seconds: f64, sample_rate: u32, seed: u64) -> Waveform<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = (seconds * sample_rate as f64).round().max(1.0) as usize;
    let sr = sample_rate as f64;

    let f0 = rng.random_range(95.0..230.0);
    let syllable_hz = rng.random_range(3.0..6.0);
    let formants = [
        rng.random_range(400.0..900.0),
        rng.random_range(1000.0..2300.0),
        rng.random_range(2300.0..3200.0),
    ];
    let harmonics = ((0.45 * sr / f0) as usize).min(40);

    let mut phase = 0.0;
    let mut hp_prev_in = 0.0;
    let mut hp_prev_out = 0.0;
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        let t = i as f64 / sr;
        let pitch = f0 * (1.0 + 0.05 * (2.0 * PI * 0.7 * t).sin() + rng.random_range(-0.002..0.002));
        phase += 2.0 * PI * pitch / sr;
        let syllable = (2.0 * PI * syllable_hz * t).sin();
        let voiced_env = syllable.max(0.0).powf(0.7);
        let unvoiced_env = (-syllable).max(0.0).powi(2) * 0.6;

        let mut voiced = 0.0;
        for k in 1..=harmonics {
            let fk = k as f64 * pitch;
            let gain: f64 = formants
                .iter()
                .map(|fm| 1.0 / (1.0 + ((fk - fm) / 150.0).powi(2)))
                .sum::<f64>()
                + 0.05;
            voiced += gain * (k as f64 * phase).sin() / k as f64;
        }

        // First-order high-pass on white noise for fricative-like bursts.
        let white = rng.random_range(-1.0..1.0);
        let hp = 0.9 * (hp_prev_out + white - hp_prev_in);
        hp_prev_in = white;
        hp_prev_out = hp;

        let floor = 0.01 * rng.random_range(-1.0..1.0);
        out.push(voiced_env * voiced + unvoiced_env * hp + floor);
    }
    let peak = out.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(1e-12);
    out.iter_mut().for_each(|v| *v *= 0.5 / peak);
    Waveform::new(out, sample_rate).expect("finite synthetic samples")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn deterministic_and_bounded() {
        let a = speech_like(0.5, 16_000, 3);
        let b = speech_like(0.5, 16_000, 3);
        assert_eq!(a, b);
        assert_eq!(a.len(), 8000);
        assert!(a.samples().iter().all(|v| v.abs() <= 0.5 + 1e-12));
        assert_ne!(a, speech_like(0.5, 16_000, 4));
    }
}
