//! Phase-bias-invariant building blocks for speech enhancement.
//!
//! * [`spectral`]: STFT/iSTFT with exact reconstruction and the globally or
//!   linearly phase-biased transforms.
//! * [`phasederiv`]: wrapped phase differences, time/frequency phase
//!   derivatives, magnitude weighting and discriminator input assembly.
//! * [`losses`]: magnitude, complex, time, phase-derivative and adversarial
//!   losses, their composites, and analytic phase gradients.
//! * [`metrics`]: SegSNR, SiSNR, magnitude error and PESQ normalization.
//! * [`augment`]: seeded phase-bias and magnitude-noise augmentation.
//!
//! Everything is generic over [`Scalar`] (`f32` or `f64`); the `F32`/`F64`
//! aliases below name the common instantiations.

pub mod augment;
pub mod error;
pub mod losses;
pub mod metrics;
pub mod phasederiv;
pub mod scalar;
pub mod spectral;

pub use error::{Error, Result};
pub use scalar::Scalar;

pub use augment::{augment_spectrogram, clip_rng, gate_statistics, AugmentConfig, AugmentRecord};
pub use losses::{
    composite, evaluate_terms, grad_loss_upb, grad_loss_wupb, loss_adv, loss_disc, loss_mag, loss_ri, loss_time,
    loss_upb, loss_wupb, CompositeKind, LossReport, LossTerms, LossWeights, PhaseGradient,
};
pub use metrics::{
    ingest_external_pesq, mag_spec_rel_err, normalize_pesq, parse_pesq_scores, segsnr, sisnr,
    MetricsReport, DEFAULT_SEGSNR_FRAME_MS,
};
pub use phasederiv::{
    assemble_disc_input, compress_magnitude, phase_derivatives, phase_of, weighted_derivatives,
    wrap, wrap_diff, DiscriminatorInput, PhaseDerivatives, PhaseSpectrogram,
    WeightedPhaseDerivatives,
};
pub use spectral::{
    biased_stft, istft, linear_biased_stft, stft, ComplexSpectrogram, StftConfig, WindowKind,
    Waveform,
};

pub type WaveformF32 = Waveform<f32>;
pub type WaveformF64 = Waveform<f64>;
pub type ComplexSpectrogramF32 = ComplexSpectrogram<f32>;
pub type ComplexSpectrogramF64 = ComplexSpectrogram<f64>;
pub type PhaseSpectrogramF32 = PhaseSpectrogram<f32>;
pub type PhaseSpectrogramF64 = PhaseSpectrogram<f64>;
pub type PhaseGradientF32 = PhaseGradient<f32>;
pub type PhaseGradientF64 = PhaseGradient<f64>;
pub type LossWeightsF32 = LossWeights<f32>;
pub type LossWeightsF64 = LossWeights<f64>;
pub type DiscriminatorInputF32 = DiscriminatorInput<f32>;
pub type DiscriminatorInputF64 = DiscriminatorInput<f64>;
