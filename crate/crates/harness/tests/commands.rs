mod common;

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use upb_core::{
    biased_stft, evaluate_terms, istft, sisnr, stft, AugmentConfig, ComplexSpectrogram, StftConfig,
};
use upb_harness::abx::{Order, Stimulus};
use upb_harness::commands::{abx_gen, augment, bias, loss};
use upb_harness::corpus::load_corpus;
use upb_harness::wav::read_wav;

#[test]
fn biased_estimate_escapes_upb_but_not_ri_or_time() {
    let t = tempfile::tempdir().unwrap();
    let corpus = common::synth_corpus(&t.path().join("c"), 1, 1.0, 90);
    let clean = load_corpus(&corpus, false).unwrap().remove(0).wave;
    let cfg = StftConfig::default();
    let cs = stft(&clean, &cfg).unwrap();
    let bs = biased_stft(&clean, &cfg, 1.2).unwrap();
    let y = istft(&bs).unwrap();
    let terms = evaluate_terms(&clean, &y, &cs, &bs, 0.3, None, None).unwrap();
    assert!(terms.upb.unwrap() < 1e-12 && terms.wupb.unwrap() < 1e-12);
    assert!(terms.mag.unwrap() < 1e-20);
    assert!(terms.ri.unwrap() > 1e-2 && terms.time.unwrap() > 1e-3);
}

#[test]
fn biased_wav_loss_far_below_random_phase() {
    // Re-analysing the biased reconstruction does not give back the biased
    // spectrogram exactly, so upb is small rather than zero.
    let t = tempfile::tempdir().unwrap();
    let corpus = common::synth_corpus(&t.path().join("c"), 2, 1.0, 91);
    let clips = load_corpus(&corpus, false).unwrap();
    let out = t.path().join("b");
    std::fs::create_dir(&out).unwrap();
    bias(&clips, &StftConfig::default(), 4, Some(1.2), Some(&out)).unwrap();
    let clean = &clips[0].wave;
    let est = read_wav(&out.join("clip_0000.wav")).unwrap();
    let weights = Default::default();
    let biased = loss(clean, &est, &StftConfig::default(), &weights, None, None).unwrap().terms;

    let cs = stft(clean, &StftConfig::default()).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let scrambled = ComplexSpectrogram::new(
        cs.data().mapv(|z| z * num_complex::Complex::from_polar(1.0, rng.random_range(-PI..PI))),
        *cs.config(),
        cs.original_len(),
    )
    .unwrap();
    let noisy = istft(&scrambled).unwrap();
    let random = loss(clean, &noisy, &StftConfig::default(), &weights, None, None).unwrap().terms;

    // Measured: upb and wupb near 0.1 of the random-phase value, ri near 0.7.
    assert!(biased.upb.unwrap() < 0.2 * random.upb.unwrap(), "{biased:?} vs {random:?}");
    assert!(biased.wupb.unwrap() < 0.2 * random.wupb.unwrap());
    assert!(biased.ri.unwrap() > 0.5 * random.ri.unwrap());
    assert!(biased.time.unwrap() > 0.0);
}

#[test]
fn augment_frequencies_on_thousand_clips() {
    let t = tempfile::tempdir().unwrap();
    let corpus = common::synth_corpus(&t.path().join("c"), 1000, 0.05, 1000);
    let clips = load_corpus(&corpus, false).unwrap();
    let out = t.path().join("o");
    std::fs::create_dir(&out).unwrap();
    let cfg = AugmentConfig {
        rng_seed: 2024,
        ..Default::default()
    };
    let s = augment(&clips, &StftConfig::default(), &cfg, &out).unwrap();
    assert_eq!(s.clips, 1000);
    for f in [s.applied_global, s.applied_linear, s.applied_magnoise] {
        assert!((f - 0.5).abs() <= 0.047, "{s:?}");
    }
    let g = upb_core::gate_statistics(&cfg, 1000, 2024).unwrap();
    assert_eq!((g.global, g.linear, g.magnoise), (s.applied_global, s.applied_linear, s.applied_magnoise));
}

#[test]
fn abx_ground_truth_matches_audio_and_orders_balance() {
    let t = tempfile::tempdir().unwrap();
    let corpus = common::synth_corpus(&t.path().join("c"), 3, 0.1, 92);
    let clips = load_corpus(&corpus, false).unwrap();
    let out = t.path().join("s");
    let m = abx_gen(&clips, &StftConfig::default(), 1000, 8, &out).unwrap();
    let biased_first = m.trials.iter().filter(|t| t.order == Order::BiasedFirst).count();
    assert!((biased_first as f64 / 1000.0 - 0.5).abs() <= 0.047, "{biased_first}");

    for tr in m.trials.iter().take(12) {
        let dir = out.join("trials").join(&tr.trial_id);
        let load = |s: Stimulus| read_wav(&dir.join(s.file_name())).unwrap();
        let x = load(Stimulus::X);
        let (unb, bia) = match tr.order {
            Order::UnbiasedFirst => (load(Stimulus::A), load(Stimulus::B)),
            Order::BiasedFirst => (load(Stimulus::B), load(Stimulus::A)),
        };
        assert_eq!(sisnr(&x, &unb).unwrap(), 35.0);
        if tr.theta_used.abs() > 0.2 && (PI - tr.theta_used.abs()) > 0.2 {
            assert!(sisnr(&x, &bia).unwrap() < 35.0);
        }
    }
    let again = abx_gen(&clips, &StftConfig::default(), 1000, 8, &t.path().join("s2")).unwrap();
    assert_eq!(m, again);
}
