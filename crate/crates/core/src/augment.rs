//! Phase-bias data augmentation: a global phase offset, a linear (time-shift)
//! phase ramp and additive magnitude noise, each gated independently.
//!
//! Randomness comes from [`ChaCha8Rng`]. Per-clip generators are derived with
//! [`clip_rng`], which selects an independent ChaCha stream per clip index, so
//! a corpus can be processed in any order or in parallel and still replay
//! bit-identically.

use num_complex::Complex;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::spectral::ComplexSpectrogram;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AugmentConfig {
    pub p_global: f64,
    pub p_linear: f64,
    pub p_magnoise: f64,
    /// Variance of the Gaussian added to magnitudes.
    pub noise_variance: f64,
    pub rng_seed: u64,
}

impl Default for AugmentConfig {
    fn default() -> Self {
        AugmentConfig {
            p_global: 0.5,
            p_linear: 0.5,
            p_magnoise: 0.5,
            noise_variance: 4e-6,
            rng_seed: 0,
        }
    }
}

impl AugmentConfig {
    /// All three augmentations disabled.
    pub fn disabled() -> Self {
        AugmentConfig {
            p_global: 0.0,
            p_linear: 0.0,
            p_magnoise: 0.0,
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (what, p) in [
            ("p_global", self.p_global),
            ("p_linear", self.p_linear),
            ("p_magnoise", self.p_magnoise),
        ] {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::OutOfRange { what, value: p });
            }
        }
        if !(self.noise_variance >= 0.0 && self.noise_variance.is_finite()) {
            return Err(Error::OutOfRange {
                what: "noise_variance",
                value: self.noise_variance,
            });
        }
        Ok(())
    }
}

/// What [`augment_spectrogram`] actually did to one utterance.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AugmentRecord<T> {
    pub applied_global: bool,
    /// Phase offset in radians, within `[-π, π)`.
    pub theta: Option<T>,
    pub applied_linear: bool,
    /// Delay in seconds, within `[0, 2π / sample_rate)`.
    pub tau_shift: Option<T>,
    pub applied_magnoise: bool,
}

impl<T> AugmentRecord<T> {
    pub fn is_identity(&self) -> bool {
        !self.applied_global && !self.applied_linear && !self.applied_magnoise
    }
}

/// Gating decisions and parameters for one utterance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AugmentPlan {
    pub theta: Option<f64>,
    pub tau_shift: Option<f64>,
    pub magnoise: bool,
}

/// Generator for clip `index` of a corpus processed with `seed`.
pub fn clip_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

/// Draws gates and parameters. Exactly five uniforms are consumed regardless
/// of the outcome, so changing one probability never reshuffles the others.
pub fn sample_plan<R: Rng + ?Sized>(cfg: &AugmentConfig, sample_rate: u32, rng: &mut R) -> AugmentPlan {
    use std::f64::consts::PI;
    let gate_global: f64 = rng.random();
    let u_theta: f64 = rng.random();
    let gate_linear: f64 = rng.random();
    let u_tau: f64 = rng.random();
    let gate_noise: f64 = rng.random();

    let theta = -PI + 2.0 * PI * u_theta;
    // Rounding can land exactly on π.
    let theta = if theta >= PI { -PI } else { theta };
    let tau_max = 2.0 * PI / sample_rate as f64;
    let tau = (u_tau * tau_max).min(tau_max * (1.0 - f64::EPSILON));

    AugmentPlan {
        theta: (gate_global < cfg.p_global).then_some(theta),
        tau_shift: (gate_linear < cfg.p_linear).then_some(tau),
        magnoise: gate_noise < cfg.p_magnoise,
    }
}

/// Applies global bias, then linear bias, then magnitude noise, each if its
/// gate fires. Magnitude noise keeps the phase and clamps magnitudes at zero.
pub fn augment_spectrogram<T: Scalar, R: Rng + ?Sized>(
    spec: &ComplexSpectrogram<T>,
    cfg: &AugmentConfig,
    rng: &mut R,
) -> Result<(ComplexSpectrogram<T>, AugmentRecord<T>)> {
    cfg.validate()?;
    let plan = sample_plan(cfg, spec.config().sample_rate(), rng);
    let mut out = spec.clone();
    if let Some(theta) = plan.theta {
        out.rotate_phase(T::lit(theta));
    }
    if let Some(tau) = plan.tau_shift {
        out.apply_linear_phase(T::lit(tau));
    }
    if plan.magnoise {
        let normal = Normal::new(0.0, cfg.noise_variance.sqrt()).map_err(|_| Error::OutOfRange {
            what: "noise_variance",
            value: cfg.noise_variance,
        })?;
        let mut data = out.into_data();
        for c in data.iter_mut() {
            let noise = T::lit(normal.sample(rng));
            let mag = c.norm();
            let new_mag = (mag + noise).max(T::zero());
            *c = if mag > T::zero() {
                *c * (new_mag / mag)
            } else {
                Complex::new(new_mag, T::zero())
            };
        }
        out = spec.with_data(data)?;
    }
    let record = AugmentRecord {
        applied_global: plan.theta.is_some(),
        theta: plan.theta.map(T::lit),
        applied_linear: plan.tau_shift.is_some(),
        tau_shift: plan.tau_shift.map(T::lit),
        applied_magnoise: plan.magnoise,
    };
    Ok((out, record))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GateFrequencies {
    pub global: f64,
    pub linear: f64,
    pub magnoise: f64,
    pub trials: usize,
}

/// Application frequency of each augmentation over `n_trials` clips gated
/// exactly as [`augment_spectrogram`] would gate clip indices `0..n_trials`.
pub fn gate_statistics(cfg: &AugmentConfig, n_trials: usize, rng_seed: u64) -> Result<GateFrequencies> {
    cfg.validate()?;
    if n_trials == 0 {
        return Err(Error::EmptyInput);
    }
    let (mut g, mut l, mut m) = (0usize, 0usize, 0usize);
    for i in 0..n_trials {
        let mut rng = clip_rng(rng_seed, i as u64);
        let plan = sample_plan(cfg, 16_000, &mut rng);
        g += plan.theta.is_some() as usize;
        l += plan.tau_shift.is_some() as usize;
        m += plan.magnoise as usize;
    }
    let n = n_trials as f64;
    Ok(GateFrequencies {
        global: g as f64 / n,
        linear: l as f64 / n,
        magnoise: m as f64 / n,
        trials: n_trials,
    })
}
