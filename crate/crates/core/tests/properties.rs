use std::f64::consts::PI;

use ndarray::Array2;
use proptest::prelude::*;

use upb_core::losses::LossTerms;
use upb_core::{
    biased_stft, composite, grad_loss_upb, grad_loss_wupb, istft, linear_biased_stft, loss_upb,
    loss_wupb, phase_derivatives, phase_of, segsnr, sisnr, stft, weighted_derivatives, wrap_diff,
    CompositeKind, LossWeights, PhaseSpectrogram, StftConfig, Waveform, WindowKind,
};

fn matrix(rows: usize, cols: usize, lo: f64, hi: f64) -> impl Strategy<Value = Array2<f64>> {
    prop::collection::vec(lo..hi, rows * cols)
        .prop_map(move |v| Array2::from_shape_vec((rows, cols), v).unwrap())
}

fn phase_pair() -> impl Strategy<Value = (Array2<f64>, Array2<f64>, Array2<f64>)> {
    (2usize..9, 2usize..9).prop_flat_map(|(r, c)| {
        (
            matrix(r, c, -PI, PI),
            matrix(r, c, -PI, PI),
            matrix(r, c, 0.0, 4.0),
        )
    })
}

fn signal(len: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-1.0f64..1.0, len)
}

fn configs() -> impl Strategy<Value = StftConfig> {
    prop_oneof![
        Just(StftConfig::default()),
        Just(StftConfig::new(512, 128, 512, WindowKind::Hann, 16_000).unwrap()),
        Just(StftConfig::new(256, 64, 256, WindowKind::Hamming, 16_000).unwrap()),
        Just(StftConfig::new(320, 160, 512, WindowKind::Hann, 16_000).unwrap()),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn wrap_diff_range_and_congruence(a in -50.0f64..50.0, b in -50.0f64..50.0) {
        let d = wrap_diff(a, b);
        prop_assert!(d > -PI && d <= PI);
        let k = ((a - b) - d) / (2.0 * PI);
        prop_assert!((k - k.round()).abs() < 1e-9);
        if (d.abs() - PI).abs() > 1e-9 {
            prop_assert!((wrap_diff(b, a) + d).abs() < 1e-12);
        }
    }

    #[test]
    fn derivatives_ignore_global_bias((phi, _, _) in phase_pair(), theta in -PI..PI) {
        let p = PhaseSpectrogram::wrapped(phi).unwrap();
        let d = phase_derivatives(&p).unwrap();
        let db = phase_derivatives(&p.biased(theta)).unwrap();
        for (x, y) in d.tpd.iter().chain(d.fpd.iter()).zip(db.tpd.iter().chain(db.fpd.iter())) {
            prop_assert!(wrap_diff(*x, *y).abs() < 1e-12);
        }
    }

    #[test]
    fn upb_losses_ignore_global_bias((phi, _, m) in phase_pair(), theta in -PI..PI) {
        let p = PhaseSpectrogram::wrapped(phi).unwrap();
        let b = p.biased(theta);
        prop_assert!(loss_upb(&p, &b).unwrap() < 1e-12);
        prop_assert!(loss_wupb(&p, &b, &m).unwrap() < 1e-12);
    }

    #[test]
    fn upb_bounded((phi, phi_hat, _) in phase_pair()) {
        let p = PhaseSpectrogram::wrapped(phi).unwrap();
        let q = PhaseSpectrogram::wrapped(phi_hat).unwrap();
        let l = loss_upb(&p, &q).unwrap();
        prop_assert!((0.0..=PI * PI).contains(&l));
    }

    #[test]
    fn weights_normalize_and_wupb_is_scale_invariant(
        (phi, phi_hat, m) in phase_pair(),
        s in prop_oneof![Just(1e-3), Just(1.0), Just(1e3), 0.01f64..100.0],
    ) {
        let p = PhaseSpectrogram::wrapped(phi).unwrap();
        let q = PhaseSpectrogram::wrapped(phi_hat).unwrap();
        let w = weighted_derivatives(&p, &m).unwrap();
        prop_assert!((w.weight_sum_tpd - 1.0).abs() < 1e-9);
        prop_assert!((w.weight_sum_fpd - 1.0).abs() < 1e-9);
        let base = loss_wupb(&p, &q, &m).unwrap();
        let scaled = loss_wupb(&p, &q, &m.mapv(|v| v * s)).unwrap();
        prop_assert!((base - scaled).abs() <= 1e-9 * base.abs().max(1e-300));
    }

    #[test]
    fn gradients_flat_along_global_bias((phi, phi_hat, m) in phase_pair()) {
        let p = PhaseSpectrogram::wrapped(phi).unwrap();
        let q = PhaseSpectrogram::wrapped(phi_hat).unwrap();
        prop_assert!(grad_loss_upb(&p, &q).unwrap().grad.sum().abs() < 1e-9);
        prop_assert!(grad_loss_wupb(&p, &q, &m).unwrap().grad.sum().abs() < 1e-9);
    }

    #[test]
    fn composites_are_linear(v in prop::collection::vec(0.0f64..10.0, 7), k in 0.0f64..5.0) {
        let t = LossTerms {
            mag: Some(v[0]), ri: Some(v[1]), time: Some(v[2]), adv: Some(v[3]),
            upb: Some(v[4]), wupb: Some(v[5]), upb_adv: Some(v[6]),
        };
        let w = LossWeights::default();
        for kind in CompositeKind::ALL {
            let a = composite(kind, &t, &w).unwrap().value;
            let b = composite(kind, &t.scaled(k), &w).unwrap().value;
            prop_assert!((b - k * a).abs() < 1e-9 * (1.0 + b.abs()));
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn roundtrip_every_config(cfg in configs(), x in signal(3000)) {
        let w = Waveform::new(x, 16_000).unwrap();
        let y = istft(&stft(&w, &cfg).unwrap()).unwrap();
        prop_assert_eq!(y.len(), w.len());
        let err = w.samples().iter().zip(y.samples()).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        prop_assert!(err < 1e-6);
    }

    #[test]
    fn biases_preserve_magnitude_and_shift_phase(
        x in signal(2000), theta in -PI..PI, m in 0usize..6,
    ) {
        let cfg = StftConfig::default();
        let w = Waveform::new(x, 16_000).unwrap();
        let base = stft(&w, &cfg).unwrap();
        let g = biased_stft(&w, &cfg, theta).unwrap();
        let l = linear_biased_stft(&w, &cfg, m as f64 / 16_000.0).unwrap();
        for ((a, b), c) in base.data().iter().zip(g.data()).zip(l.data()) {
            let r = a.norm();
            prop_assert!((r - b.norm()).abs() <= 1e-12 * r.max(1e-300));
            prop_assert!((r - c.norm()).abs() <= 1e-12 * r.max(1e-300));
            if r > 1e-8 {
                prop_assert!(wrap_diff(b.arg() - a.arg(), -theta).abs() < 1e-9);
            }
        }
        let pb = phase_of(&g);
        let pa = phase_of(&base);
        prop_assert!(loss_upb(&pa, &pb).unwrap() < 1e-12);
    }

    #[test]
    fn sisnr_scale_invariant(x in signal(1600), s in 0.01f64..100.0) {
        let r = Waveform::new(x.clone(), 16_000).unwrap();
        let noisy = Waveform::new(
            x.iter().enumerate().map(|(i, v)| v + 0.3 * ((i * 7919) % 13) as f64 / 13.0).collect(),
            16_000,
        ).unwrap();
        let scaled = Waveform::new(noisy.samples().iter().map(|v| v * s).collect(), 16_000).unwrap();
        let a = sisnr(&r, &noisy).unwrap();
        let b = sisnr(&r, &scaled).unwrap();
        prop_assert!((a - b).abs() < 1e-9);
        prop_assert!((-10.0..=35.0).contains(&a));
        let seg = segsnr(&r, &noisy, 32.0).unwrap();
        prop_assert!((-10.0..=35.0).contains(&seg));
    }
}

#[test]
fn segsnr_never_improves_with_more_noise() {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(77);
    let x: Vec<f64> = (0..16_000)
        .map(|i| 0.5 * (2.0 * PI * 220.0 * i as f64 / 16_000.0).sin())
        .collect();
    let noise: Vec<f64> = (0..16_000).map(|_| rng.random_range(-1.0..1.0)).collect();
    let reference = Waveform::new(x.clone(), 16_000).unwrap();
    let mut last = f64::INFINITY;
    for level in 0..20 {
        let g = 1e-3 * 1.5f64.powi(level);
        let est = Waveform::new(x.iter().zip(&noise).map(|(a, n)| a + g * n).collect(), 16_000).unwrap();
        let s = segsnr(&reference, &est, 32.0).unwrap();
        assert!(s <= last + 1e-12, "level {level}: {s} > {last}");
        last = s;
    }
}
