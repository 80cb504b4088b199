//! Windowed STFT / iSTFT with exact reconstruction, plus the globally and
//! linearly phase-biased analysis variants.
//!
//! Frames are centered by reflection-padding `frame_length / 2` samples at
//! both ends of the signal. Each windowed frame sits at offset zero of a
//! zero-padded `fft_size` buffer and only the one-sided half of the spectrum
//! (`fft_size / 2 + 1` bins) is kept. Synthesis overlap-adds the whole
//! inverse-FFT buffer of every frame and divides by the overlap-added analysis
//! window. Under the constant-overlap-add condition a linear phase ramp then
//! inverts to an exact delay, as long as the delayed frame stays inside the
//! zero-padded FFT buffer.

use std::sync::Arc;

use ndarray::Array2;
use num_complex::Complex;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Overlap-add normalization below this value is treated as zero coverage.
const NORM_FLOOR: f64 = 1e-8;
/// Maximum relative ripple of the summed window accepted as overlap-add constant.
const COLA_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum WindowKind {
    Hamming,
    Hann,
}

impl WindowKind {
    /// Periodic window of length `len`.
    pub fn build<T: Scalar>(self, len: usize) -> Vec<T> {
        let a = match self {
            WindowKind::Hamming => 0.54,
            WindowKind::Hann => 0.5,
        };
        (0..len)
            .map(|n| {
                let phase = 2.0 * std::f64::consts::PI * n as f64 / len as f64;
                T::lit(a - (1.0 - a) * phase.cos())
            })
            .collect()
    }
}

#[derive(Serialize, Deserialize)]
struct RawStftConfig {
    frame_length: usize,
    hop: usize,
    fft_size: usize,
    window: WindowKind,
    sample_rate: u32,
}

/// Frame geometry, window and sample rate of an STFT.
///
/// Validated on construction: `hop <= frame_length <= fft_size`, `fft_size`
/// a power of two, and the window sums to a constant under the given hop.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "RawStftConfig", into = "RawStftConfig")]
pub struct StftConfig {
    frame_length: usize,
    hop: usize,
    fft_size: usize,
    window: WindowKind,
    sample_rate: u32,
}

impl TryFrom<RawStftConfig> for StftConfig {
    type Error = Error;

    fn try_from(raw: RawStftConfig) -> Result<Self> {
        StftConfig::new(
            raw.frame_length,
            raw.hop,
            raw.fft_size,
            raw.window,
            raw.sample_rate,
        )
    }
}

impl From<StftConfig> for RawStftConfig {
    fn from(c: StftConfig) -> Self {
        RawStftConfig {
            frame_length: c.frame_length,
            hop: c.hop,
            fft_size: c.fft_size,
            window: c.window,
            sample_rate: c.sample_rate,
        }
    }
}

impl Default for StftConfig {
    /// 25 ms Hamming frames with a 6.25 ms hop and a 512-point FFT at 16 kHz.
    fn default() -> Self {
        StftConfig::new(400, 100, 512, WindowKind::Hamming, 16_000)
            .expect("default STFT configuration is valid")
    }
}

impl StftConfig {
    pub fn new(
        frame_length: usize,
        hop: usize,
        fft_size: usize,
        window: WindowKind,
        sample_rate: u32,
    ) -> Result<Self> {
        if frame_length == 0 || hop == 0 {
            return Err(Error::InvalidConfig(
                "frame_length and hop must be positive".into(),
            ));
        }
        if hop > frame_length {
            return Err(Error::InvalidConfig(format!(
                "hop {hop} exceeds frame_length {frame_length}"
            )));
        }
        if !fft_size.is_power_of_two() {
            return Err(Error::InvalidConfig(format!(
                "fft_size {fft_size} is not a power of two"
            )));
        }
        if fft_size < frame_length {
            return Err(Error::InvalidConfig(format!(
                "fft_size {fft_size} is smaller than frame_length {frame_length}"
            )));
        }
        if sample_rate == 0 {
            return Err(Error::InvalidConfig("sample_rate must be positive".into()));
        }
        let deviation = cola_deviation(&window.build::<f64>(frame_length), hop);
        if deviation.is_nan() || deviation > COLA_TOLERANCE {
            return Err(Error::ColaViolation { deviation });
        }
        Ok(StftConfig {
            frame_length,
            hop,
            fft_size,
            window,
            sample_rate,
        })
    }

    /// Same geometry at a different sample rate.
    pub fn with_sample_rate(self, sample_rate: u32) -> Result<Self> {
        StftConfig::new(
            self.frame_length,
            self.hop,
            self.fft_size,
            self.window,
            sample_rate,
        )
    }

    pub fn frame_length(&self) -> usize {
        self.frame_length
    }

    pub fn hop(&self) -> usize {
        self.hop
    }

    pub fn fft_size(&self) -> usize {
        self.fft_size
    }

    pub fn window(&self) -> WindowKind {
        self.window
    }

    pub fn sample_rate(&self) -> u32 {
        self.sample_rate
    }

    /// Number of one-sided frequency bins.
    pub fn bins(&self) -> usize {
        self.fft_size / 2 + 1
    }

    /// Reflection padding applied at each end of the signal.
    pub fn center_pad(&self) -> usize {
        self.frame_length / 2
    }

    /// Number of frames produced for a signal of `len` samples.
    pub fn frames_for(&self, len: usize) -> usize {
        (len + 2 * self.center_pad() - self.frame_length) / self.hop + 1
    }

    /// Angular frequency of bin `k` in rad/s.
    pub fn bin_angular_frequency(&self, k: usize) -> f64 {
        2.0 * std::f64::consts::PI * k as f64 * self.sample_rate as f64 / self.fft_size as f64
    }
}

/// Relative ripple `(max - min) / max` of the hop-shifted window sum.
fn cola_deviation(window: &[f64], hop: usize) -> f64 {
    let mut sums = vec![0.0; hop];
    for (n, w) in window.iter().enumerate() {
        sums[n % hop] += w;
    }
    let max = sums.iter().cloned().fold(f64::MIN, f64::max);
    let min = sums.iter().cloned().fold(f64::MAX, f64::min);
    if max <= NORM_FLOOR {
        return f64::INFINITY;
    }
    (max - min) / max
}

/// Mono sample buffer with its sample rate.
#[derive(Debug, Clone, PartialEq)]
pub struct Waveform<T> {
    samples: Vec<T>,
    sample_rate: u32,
}

impl<T: Scalar> Waveform<T> {
    pub fn new(samples: Vec<T>, sample_rate: u32) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::EmptyInput);
        }
        if samples.iter().any(|s| !s.is_finite()) {
            return Err(Error::NonFinite("waveform"));
        }
        Ok(Waveform {
            samples,
            sample_rate,
        })
    }

    pub fn samples(&self) -> &[T] {
        &self.samples
    }

    pub fn into_samples(self) -> Vec<T> {
        self.samples
    }

    pub fn sample_rate(&self) -> u32 {
        self.sample_rate
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn duration_secs(&self) -> f64 {
        self.samples.len() as f64 / self.sample_rate as f64
    }
}

/// One-sided complex spectrogram, frames along axis 0 and bins along axis 1.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexSpectrogram<T> {
    data: Array2<Complex<T>>,
    config: StftConfig,
    original_len: Option<usize>,
}

impl<T: Scalar> ComplexSpectrogram<T> {
    pub fn new(
        data: Array2<Complex<T>>,
        config: StftConfig,
        original_len: Option<usize>,
    ) -> Result<Self> {
        if data.ncols() != config.bins() {
            return Err(Error::ShapeMismatch {
                expected: (data.nrows(), config.bins()),
                found: data.dim(),
            });
        }
        if data.iter().any(|c| !c.re.is_finite() || !c.im.is_finite()) {
            return Err(Error::NonFinite("spectrogram"));
        }
        Ok(ComplexSpectrogram {
            data,
            config,
            original_len,
        })
    }

    pub fn data(&self) -> &Array2<Complex<T>> {
        &self.data
    }

    pub fn into_data(self) -> Array2<Complex<T>> {
        self.data
    }

    pub fn config(&self) -> &StftConfig {
        &self.config
    }

    /// Length of the signal this spectrogram was computed from, if known.
    pub fn original_len(&self) -> Option<usize> {
        self.original_len
    }

    pub fn frames(&self) -> usize {
        self.data.nrows()
    }

    pub fn bins(&self) -> usize {
        self.data.ncols()
    }

    pub fn dim(&self) -> (usize, usize) {
        self.data.dim()
    }

    pub fn magnitude(&self) -> Array2<T> {
        self.data.mapv(|c| c.norm())
    }

    /// Replaces the bin data, keeping config and length metadata.
    pub fn with_data(&self, data: Array2<Complex<T>>) -> Result<Self> {
        ComplexSpectrogram::new(data, self.config, self.original_len)
    }

    /// Multiplies every bin by `e^(-j·theta)`.
    pub fn rotate_phase(&mut self, theta: T) {
        let rot = Complex::from_polar(T::one(), -theta);
        self.data.mapv_inplace(|c| c * rot);
    }

    /// Multiplies bin `k` by `e^(-j·ω_k·tau_shift)`, a delay of `tau_shift` seconds.
    pub fn apply_linear_phase(&mut self, tau_shift: T) {
        let cfg = self.config;
        for (k, mut column) in self.data.columns_mut().into_iter().enumerate() {
            let omega = T::lit(cfg.bin_angular_frequency(k));
            let rot = Complex::from_polar(T::one(), -(omega * tau_shift));
            column.mapv_inplace(|c| c * rot);
        }
    }
}

/// Forward/inverse transform plans for a fixed configuration.
pub struct Stft<T: Scalar> {
    config: StftConfig,
    window: Vec<T>,
    forward: Arc<dyn Fft<T>>,
    inverse: Arc<dyn Fft<T>>,
}

impl<T: Scalar> Stft<T> {
    pub fn new(config: StftConfig) -> Self {
        let mut planner = FftPlanner::new();
        Stft {
            config,
            window: config.window().build(config.frame_length()),
            forward: planner.plan_fft_forward(config.fft_size()),
            inverse: planner.plan_fft_inverse(config.fft_size()),
        }
    }

    pub fn config(&self) -> &StftConfig {
        &self.config
    }

    pub fn window(&self) -> &[T] {
        &self.window
    }

    pub fn forward(&self, x: &Waveform<T>) -> Result<ComplexSpectrogram<T>> {
        let cfg = &self.config;
        if x.sample_rate() != cfg.sample_rate() {
            return Err(Error::SampleRateMismatch {
                expected: cfg.sample_rate(),
                found: x.sample_rate(),
            });
        }
        let len = x.len();
        if len == 0 {
            return Err(Error::EmptyInput);
        }
        if len < cfg.frame_length() {
            return Err(Error::SignalTooShort {
                len,
                frame_length: cfg.frame_length(),
            });
        }

        let padded = reflect_pad(x.samples(), cfg.center_pad());
        let frames = cfg.frames_for(len);
        let bins = cfg.bins();
        let n_fft = cfg.fft_size();
        let mut data = Array2::from_elem((frames, bins), Complex::new(T::zero(), T::zero()));
        let mut buf = vec![Complex::new(T::zero(), T::zero()); n_fft];

        for (t, mut row) in data.rows_mut().into_iter().enumerate() {
            let start = t * cfg.hop();
            buf.iter_mut().for_each(|c| *c = Complex::new(T::zero(), T::zero()));
            for (n, (slot, w)) in buf.iter_mut().zip(&self.window).enumerate() {
                slot.re = padded[start + n] * *w;
            }
            self.forward.process(&mut buf);
            row.iter_mut().zip(&buf[..bins]).for_each(|(o, v)| *o = *v);
        }
        ComplexSpectrogram::new(data, *cfg, Some(len))
    }

    pub fn inverse(&self, spec: &ComplexSpectrogram<T>) -> Result<Waveform<T>> {
        let cfg = &self.config;
        if spec.config() != cfg {
            return Err(Error::InvalidConfig(
                "spectrogram was produced with a different configuration".into(),
            ));
        }
        let frames = spec.frames();
        if frames == 0 {
            return Err(Error::EmptyInput);
        }
        let n_fft = cfg.fft_size();
        let bins = cfg.bins();
        let hop = cfg.hop();
        let fl = cfg.frame_length();
        let pad = cfg.center_pad();
        let total = (frames - 1) * hop + n_fft;

        let mut out = vec![T::zero(); total];
        let mut norm = vec![T::zero(); total];
        let mut buf = vec![Complex::new(T::zero(), T::zero()); n_fft];
        let scale = T::one() / T::from_usize_lossy(n_fft);

        for (t, row) in spec.data().rows().into_iter().enumerate() {
            for (k, v) in row.iter().enumerate() {
                buf[k] = *v;
            }
            for k in 1..n_fft - bins + 1 {
                buf[n_fft - k] = row[k].conj();
            }
            self.inverse.process(&mut buf);
            let start = t * hop;
            for (n, v) in buf.iter().enumerate() {
                out[start + n] = out[start + n] + v.re * scale;
            }
            for (n, w) in self.window.iter().enumerate() {
                norm[start + n] = norm[start + n] + *w;
            }
        }

        let floor = T::lit(NORM_FLOOR);
        for (o, n) in out.iter_mut().zip(&norm) {
            *o = if *n > floor { *o / *n } else { T::zero() };
        }

        let len = spec
            .original_len()
            .unwrap_or_else(|| ((frames - 1) * hop + fl).saturating_sub(2 * pad));
        let mut samples: Vec<T> = out.into_iter().skip(pad).take(len).collect();
        samples.resize(len, T::zero());
        Waveform::new(samples, cfg.sample_rate())
    }
}

fn reflect_pad<T: Scalar>(x: &[T], pad: usize) -> Vec<T> {
    let len = x.len() as isize;
    (0..x.len() + 2 * pad)
        .map(|i| {
            let mut idx = i as isize - pad as isize;
            if len == 1 {
                return x[0];
            }
            // Repeated reflection keeps very short signals in bounds.
            while idx < 0 || idx >= len {
                if idx < 0 {
                    idx = -idx;
                }
                if idx >= len {
                    idx = 2 * (len - 1) - idx;
                }
            }
            x[idx as usize]
        })
        .collect()
}

pub fn stft<T: Scalar>(x: &Waveform<T>, cfg: &StftConfig) -> Result<ComplexSpectrogram<T>> {
    Stft::new(*cfg).forward(x)
}

pub fn istft<T: Scalar>(spec: &ComplexSpectrogram<T>) -> Result<Waveform<T>> {
    Stft::new(*spec.config()).inverse(spec)
}

/// STFT with a constant phase offset `theta` added to every bin: `stft(x)·e^(-jθ)`.
pub fn biased_stft<T: Scalar>(
    x: &Waveform<T>,
    cfg: &StftConfig,
    theta: T,
) -> Result<ComplexSpectrogram<T>> {
    if !theta.is_finite() {
        return Err(Error::NonFinite("theta"));
    }
    let mut spec = stft(x, cfg)?;
    spec.rotate_phase(theta);
    Ok(spec)
}

/// STFT with a frequency-proportional phase offset `ω·tau_shift`, i.e. a
/// (possibly fractional) delay of `tau_shift` seconds.
pub fn linear_biased_stft<T: Scalar>(
    x: &Waveform<T>,
    cfg: &StftConfig,
    tau_shift: T,
) -> Result<ComplexSpectrogram<T>> {
    let max = cfg.frame_length() as f64 / cfg.sample_rate() as f64;
    let tau = tau_shift.as_f64();
    if !(0.0..max).contains(&tau) {
        return Err(Error::OutOfRange {
            what: "tau_shift",
            value: tau,
        });
    }
    let mut spec = stft(x, cfg)?;
    spec.apply_linear_phase(tau_shift);
    Ok(spec)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn noise(n: usize, seed: u64) -> Waveform<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Waveform::new((0..n).map(|_| rng.random_range(-1.0..1.0)).collect(), 16_000).unwrap()
    }

    #[test]
    fn default_config_matches_conventions() {
        let c = StftConfig::default();
        assert_eq!(
            (c.frame_length(), c.hop(), c.fft_size(), c.bins()),
            (400, 100, 512, 257)
        );
        assert_eq!(c.window(), WindowKind::Hamming);
    }

    #[test]
    fn config_rejects_bad_geometry() {
        assert!(StftConfig::new(400, 500, 512, WindowKind::Hamming, 16_000).is_err());
        assert!(StftConfig::new(400, 100, 500, WindowKind::Hamming, 16_000).is_err());
        assert!(StftConfig::new(400, 100, 256, WindowKind::Hamming, 16_000).is_err());
        assert!(matches!(
            StftConfig::new(400, 160, 512, WindowKind::Hann, 16_000),
            Err(Error::ColaViolation { .. })
        ));
        assert!(StftConfig::new(512, 128, 512, WindowKind::Hann, 16_000).is_ok());
        assert!(StftConfig::new(400, 200, 512, WindowKind::Hann, 16_000).is_ok());
    }

    #[test]
    fn config_deserialization_validates() {
        let bad = r#"{"frame_length":400,"hop":160,"fft_size":512,"window":"hamming","sample_rate":16000}"#;
        assert!(serde_json::from_str::<StftConfig>(bad).is_err());
        let good = serde_json::to_string(&StftConfig::default()).unwrap();
        assert_eq!(
            serde_json::from_str::<StftConfig>(&good).unwrap(),
            StftConfig::default()
        );
    }

    #[test]
    fn frame_count_follows_center_padding() {
        let cfg = StftConfig::default();
        let x = noise(16_000, 1);
        let spec = stft(&x, &cfg).unwrap();
        assert_eq!(spec.frames(), (16_000 + 400 - 400) / 100 + 1);
        assert_eq!(spec.bins(), 257);
    }

    #[test]
    fn rejects_mismatched_rate_and_short_input() {
        let cfg = StftConfig::default();
        let x = Waveform::new(vec![0.0f64; 1000], 8000).unwrap();
        assert!(matches!(
            stft(&x, &cfg),
            Err(Error::SampleRateMismatch { .. })
        ));
        let short = Waveform::new(vec![0.0f64; 399], 16_000).unwrap();
        assert!(matches!(
            stft(&short, &cfg),
            Err(Error::SignalTooShort { .. })
        ));
        assert!(matches!(
            Waveform::<f64>::new(vec![], 16_000),
            Err(Error::EmptyInput)
        ));
    }

    #[test]
    fn zero_signal_gives_zero_spectrogram_and_back() {
        let cfg = StftConfig::default();
        let x = Waveform::new(vec![0.0f64; 16_000], 16_000).unwrap();
        let spec = stft(&x, &cfg).unwrap();
        assert!(spec.data().iter().all(|c| c.norm() == 0.0));
        let y = istft(&spec).unwrap();
        assert!(y.samples().iter().all(|v| *v == 0.0));
    }

    #[test]
    fn stft_is_linear() {
        let cfg = StftConfig::default();
        let x = noise(8000, 2);
        let x2 = Waveform::new(x.samples().iter().map(|v| 2.0 * v).collect(), 16_000).unwrap();
        let a = stft(&x, &cfg).unwrap();
        let b = stft(&x2, &cfg).unwrap();
        let err = a
            .data()
            .iter()
            .zip(b.data())
            .map(|(p, q)| (p * 2.0 - q).norm())
            .fold(0.0, f64::max);
        assert!(err < 1e-12, "{err}");
    }

    #[test]
    fn roundtrip_exact_f64_and_f32() {
        let cfg = StftConfig::default();
        let x = noise(16_000, 3);
        let y = istft(&stft(&x, &cfg).unwrap()).unwrap();
        assert_eq!(y.len(), x.len());
        let err = x
            .samples()
            .iter()
            .zip(y.samples())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        assert!(err < 1e-6, "{err}");

        let x32 = Waveform::new(x.samples().iter().map(|v| *v as f32).collect(), 16_000).unwrap();
        let y32 = istft(&stft(&x32, &cfg).unwrap()).unwrap();
        let err32 = x32
            .samples()
            .iter()
            .zip(y32.samples())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0f32, f32::max);
        assert!(err32 < 1e-5, "{err32}");
    }

    #[test]
    fn biased_by_pi_negates() {
        let cfg = StftConfig::default();
        let x = noise(4000, 4);
        let a = stft(&x, &cfg).unwrap();
        let b = biased_stft(&x, &cfg, std::f64::consts::PI).unwrap();
        let err = a
            .data()
            .iter()
            .zip(b.data())
            .map(|(p, q)| (p + q).norm())
            .fold(0.0, f64::max);
        assert!(err < 1e-12);
        let z = biased_stft(&x, &cfg, 0.0).unwrap();
        assert_eq!(z, a);
    }

    #[test]
    fn linear_bias_range_checked() {
        let cfg = StftConfig::default();
        let x = noise(4000, 5);
        assert!(linear_biased_stft(&x, &cfg, -1e-6).is_err());
        assert!(linear_biased_stft(&x, &cfg, 400.0 / 16_000.0).is_err());
        assert_eq!(
            linear_biased_stft(&x, &cfg, 0.0).unwrap(),
            stft(&x, &cfg).unwrap()
        );
    }

    #[test]
    fn reflect_pad_mirrors_edges() {
        let x = [1.0f64, 2.0, 3.0, 4.0];
        assert_eq!(
            reflect_pad(&x, 2),
            vec![3.0, 2.0, 1.0, 2.0, 3.0, 4.0, 3.0, 2.0]
        );
    }
}
