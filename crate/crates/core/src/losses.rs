//! Loss terms for magnitude/phase speech enhancement and their weighted
//! composites.
//!
//! Every expectation is realized as an arithmetic mean over the index set of
//! the matrix it ranges over. The phase-derivative losses also come with
//! analytic gradients with respect to the estimated phase.

use ndarray::{s, Array2, ArrayView2};
use num_complex::Complex;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::phasederiv::{
    check_same_shape, derivative_weights, phase_derivatives, wrap_diff, PhaseSpectrogram,
};
use crate::scalar::Scalar;
use crate::spectral::{ComplexSpectrogram, Waveform};

/// Residuals closer than this to `±π` make the gradient unreliable.
pub const WRAP_BOUNDARY_MARGIN: f64 = 1e-3;

/// `λ1..λ7` and the magnitude compression exponent.
///
/// `lambda[i]` holds `λ(i+1)`: magnitude, real/imaginary, time, adversarial,
/// UPB, weighted UPB and UPB-adversarial.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar + Serialize + serde::de::DeserializeOwned")]
pub struct LossWeights<T> {
    pub lambda: [T; 7],
    #[serde(default = "default_compression")]
    pub c: T,
}

fn default_compression<T: Scalar>() -> T {
    T::lit(0.3)
}

impl<T: Scalar> Default for LossWeights<T> {
    fn default() -> Self {
        LossWeights {
            lambda: [0.9, 0.1, 0.2, 0.05, 0.05, 0.05, 0.05].map(T::lit),
            c: default_compression(),
        }
    }
}

impl<T: Scalar> LossWeights<T> {
    pub fn validate(&self) -> Result<()> {
        for l in self.lambda {
            if !l.is_finite() || l < T::zero() {
                return Err(Error::OutOfRange {
                    what: "loss weight",
                    value: l.as_f64(),
                });
            }
        }
        if !(self.c > T::zero() && self.c <= T::one()) {
            return Err(Error::OutOfRange {
                what: "compression exponent",
                value: self.c.as_f64(),
            });
        }
        Ok(())
    }

    /// `λ_n`, 1-based.
    pub fn get(&self, n: usize) -> T {
        self.lambda[n - 1]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum CompositeKind {
    /// `λ1·mag + λ2·ri + λ3·time + λ4·adv`
    #[serde(rename = "L_ori")]
    Original,
    /// `λ1·mag + λ4·adv + λ5·upb`
    L1,
    /// `λ1·mag + λ4·adv + λ6·wupb`
    L2,
    /// `λ1·mag + λ6·wupb + λ7·upb_adv`
    L3,
}

impl CompositeKind {
    pub const ALL: [CompositeKind; 4] = [
        CompositeKind::Original,
        CompositeKind::L1,
        CompositeKind::L2,
        CompositeKind::L3,
    ];

    pub fn name(self) -> &'static str {
        match self {
            CompositeKind::Original => "L_ori",
            CompositeKind::L1 => "L1",
            CompositeKind::L2 => "L2",
            CompositeKind::L3 => "L3",
        }
    }
}

/// Individual loss values; absent terms are `None`.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct LossTerms<T> {
    pub mag: Option<T>,
    pub ri: Option<T>,
    pub time: Option<T>,
    pub adv: Option<T>,
    pub upb: Option<T>,
    pub wupb: Option<T>,
    pub upb_adv: Option<T>,
}

impl<T: Scalar> LossTerms<T> {
    /// Multiplies every present term by `k`.
    pub fn scaled(&self, k: T) -> Self {
        let f = |v: Option<T>| v.map(|x| x * k);
        LossTerms {
            mag: f(self.mag),
            ri: f(self.ri),
            time: f(self.time),
            adv: f(self.adv),
            upb: f(self.upb),
            wupb: f(self.wupb),
            upb_adv: f(self.upb_adv),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossReport<T> {
    pub kind: CompositeKind,
    pub terms: LossTerms<T>,
    pub value: T,
}

/// `d loss / d φ̂` together with the number of residuals that sat within
/// [`WRAP_BOUNDARY_MARGIN`] of the wrap discontinuity.
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseGradient<T> {
    pub grad: Array2<T>,
    pub boundary_hits: usize,
}

impl<T: Scalar> PhaseGradient<T> {
    pub fn is_reliable(&self) -> bool {
        self.boundary_hits == 0
    }
}

fn mean<T: Scalar>(it: impl ExactSizeIterator<Item = T>) -> T {
    let n = it.len();
    it.sum::<T>() / T::from_usize_lossy(n)
}

/// MSE of power-compressed magnitudes.
pub fn loss_mag<T: Scalar>(m: &Array2<T>, m_hat: &Array2<T>, c: T) -> Result<T> {
    check_same_shape(m, m_hat)?;
    if m.is_empty() {
        return Err(Error::EmptyInput);
    }
    let m = crate::phasederiv::compress(m, c)?;
    let m_hat = crate::phasederiv::compress(m_hat, c)?;
    Ok(mean(m.iter().zip(m_hat.iter()).map(|(a, b)| (*a - *b).powi(2))))
}

fn compress_complex<T: Scalar>(z: Complex<T>, c: T) -> Complex<T> {
    let r = z.norm();
    if r == T::zero() {
        z
    } else {
        z * (r.powf(c) / r)
    }
}

/// MSE of real and imaginary parts of the magnitude-compressed spectra.
pub fn loss_ri<T: Scalar>(
    x: &ComplexSpectrogram<T>,
    x_hat: &ComplexSpectrogram<T>,
    c: T,
) -> Result<T> {
    check_same_shape(x.data(), x_hat.data())?;
    if !(c > T::zero() && c <= T::one()) {
        return Err(Error::OutOfRange {
            what: "compression exponent",
            value: c.as_f64(),
        });
    }
    Ok(mean(x.data().iter().zip(x_hat.data().iter()).map(|(a, b)| {
        let d = compress_complex(*a, c) - compress_complex(*b, c);
        d.re * d.re + d.im * d.im
    })))
}

/// Mean absolute sample difference.
pub fn loss_time<T: Scalar>(x: &Waveform<T>, x_hat: &Waveform<T>) -> Result<T> {
    if x.len() != x_hat.len() {
        return Err(Error::LengthMismatch {
            left: x.len(),
            right: x_hat.len(),
        });
    }
    Ok(mean(
        x.samples()
            .iter()
            .zip(x_hat.samples())
            .map(|(a, b)| (*a - *b).abs()),
    ))
}

/// Wrapped residual fields for one derivative axis.
struct AxisResidual<T> {
    residual: Array2<T>,
    /// Per-element weight, 1 for the unweighted loss.
    weight: Option<Array2<T>>,
    /// Estimated derivative before weighting, for boundary checks.
    est: Array2<T>,
}

fn axis_residual<T: Scalar>(
    clean: &Array2<T>,
    est: Array2<T>,
    weight: Option<Array2<T>>,
) -> AxisResidual<T> {
    let residual = match &weight {
        None => ndarray::Zip::from(clean)
            .and(&est)
            .map_collect(|a, b| wrap_diff(*a, *b)),
        Some(w) => ndarray::Zip::from(clean)
            .and(&est)
            .and(w)
            .map_collect(|a, b, w| wrap_diff(*w * *a, *w * *b)),
    };
    AxisResidual {
        residual,
        weight,
        est,
    }
}

fn half_mean_square<T: Scalar>(r: &Array2<T>) -> T {
    T::lit(0.5) * mean(r.iter().map(|v| *v * *v))
}

fn residuals<T: Scalar>(
    phi: &PhaseSpectrogram<T>,
    phi_hat: &PhaseSpectrogram<T>,
    m_cmp_clean: Option<&Array2<T>>,
) -> Result<(AxisResidual<T>, AxisResidual<T>)> {
    check_same_shape(phi.angles(), phi_hat.angles())?;
    let d = phase_derivatives(phi)?;
    let d_hat = phase_derivatives(phi_hat)?;
    let (w_t, w_f) = match m_cmp_clean {
        None => (None, None),
        Some(m) => {
            check_same_shape(phi.angles(), m)?;
            let w = derivative_weights(m)?;
            (Some(w.tpd), Some(w.fpd))
        }
    };
    Ok((
        axis_residual(&d.tpd, d_hat.tpd, w_t),
        axis_residual(&d.fpd, d_hat.fpd, w_f),
    ))
}

/// Half mean-square wrapped mismatch of TPD plus that of FPD.
///
/// Zero whenever `phi_hat` is `phi` shifted by a constant angle.
pub fn loss_upb<T: Scalar>(phi: &PhaseSpectrogram<T>, phi_hat: &PhaseSpectrogram<T>) -> Result<T> {
    let (t, f) = residuals(phi, phi_hat, None)?;
    Ok(half_mean_square(&t.residual) + half_mean_square(&f.residual))
}

/// Like [`loss_upb`] with both derivative fields scaled by weights taken from
/// the clean compressed magnitude.
pub fn loss_wupb<T: Scalar>(
    phi: &PhaseSpectrogram<T>,
    phi_hat: &PhaseSpectrogram<T>,
    m_cmp_clean: &Array2<T>,
) -> Result<T> {
    let (t, f) = residuals(phi, phi_hat, Some(m_cmp_clean))?;
    Ok(half_mean_square(&t.residual) + half_mean_square(&f.residual))
}

fn validate_scores<T: Scalar>(scores: &[T], what: &'static str) -> Result<()> {
    if scores.is_empty() {
        return Err(Error::EmptyInput);
    }
    if let Some(s) = scores.iter().find(|s| !s.is_finite()) {
        return Err(Error::OutOfRange {
            what,
            value: s.as_f64(),
        });
    }
    Ok(())
}

/// Generator adversarial loss: mean of `(score - 1)²`.
pub fn loss_adv<T: Scalar>(disc_scores: &[T]) -> Result<T> {
    validate_scores(disc_scores, "discriminator score")?;
    Ok(mean(disc_scores.iter().map(|s| (*s - T::one()).powi(2))))
}

/// Discriminator loss: clean/clean scores pulled to 1, clean/estimate scores
/// pulled to the normalized PESQ of the estimate.
pub fn loss_disc<T: Scalar>(
    scores_clean_vs_clean: &[T],
    scores_clean_vs_est: &[T],
    q_pesq: &[T],
) -> Result<T> {
    validate_scores(scores_clean_vs_clean, "discriminator score")?;
    validate_scores(scores_clean_vs_est, "discriminator score")?;
    if scores_clean_vs_est.len() != q_pesq.len() {
        return Err(Error::LengthMismatch {
            left: scores_clean_vs_est.len(),
            right: q_pesq.len(),
        });
    }
    if let Some(q) = q_pesq
        .iter()
        .find(|q| !(**q >= T::zero() && **q <= T::one()))
    {
        return Err(Error::OutOfRange {
            what: "normalized PESQ",
            value: q.as_f64(),
        });
    }
    let real = mean(scores_clean_vs_clean.iter().map(|s| (*s - T::one()).powi(2)));
    let fake = mean(
        scores_clean_vs_est
            .iter()
            .zip(q_pesq)
            .map(|(s, q)| (*s - *q).powi(2)),
    );
    Ok(real + fake)
}

pub fn composite<T: Scalar>(
    kind: CompositeKind,
    terms: &LossTerms<T>,
    w: &LossWeights<T>,
) -> Result<LossReport<T>> {
    let need = |v: Option<T>, term: &'static str| {
        v.ok_or(Error::MissingTerm {
            composite: kind.name(),
            term,
        })
    };
    let mag = need(terms.mag, "mag")?;
    let value = match kind {
        CompositeKind::Original => {
            w.get(1) * mag
                + w.get(2) * need(terms.ri, "ri")?
                + w.get(3) * need(terms.time, "time")?
                + w.get(4) * need(terms.adv, "adv")?
        }
        CompositeKind::L1 => {
            w.get(1) * mag + w.get(4) * need(terms.adv, "adv")? + w.get(5) * need(terms.upb, "upb")?
        }
        CompositeKind::L2 => {
            w.get(1) * mag
                + w.get(4) * need(terms.adv, "adv")?
                + w.get(6) * need(terms.wupb, "wupb")?
        }
        CompositeKind::L3 => {
            w.get(1) * mag
                + w.get(6) * need(terms.wupb, "wupb")?
                + w.get(7) * need(terms.upb_adv, "upb_adv")?
        }
    };
    Ok(LossReport {
        kind,
        terms: *terms,
        value,
    })
}

fn near_boundary<T: Scalar>(v: T) -> bool {
    v.abs() > T::PI() - T::lit(WRAP_BOUNDARY_MARGIN)
}

/// Scatters `d loss / d δ̂` back onto the phase entries of a first-difference
/// stencil along `axis` (0 = time, 1 = frequency).
fn scatter<T: Scalar>(grad: &mut Array2<T>, d_est: ArrayView2<T>, axis: usize) {
    let (head, tail) = if axis == 0 {
        (s![1.., ..], s![..-1, ..])
    } else {
        (s![.., 1..], s![.., ..-1])
    };
    grad.slice_mut(head).zip_mut_with(&d_est, |g, d| *g = *g + *d);
    grad.slice_mut(tail).zip_mut_with(&d_est, |g, d| *g = *g - *d);
}

fn gradient<T: Scalar>(
    phi: &PhaseSpectrogram<T>,
    phi_hat: &PhaseSpectrogram<T>,
    m_cmp_clean: Option<&Array2<T>>,
) -> Result<PhaseGradient<T>> {
    let (rt, rf) = residuals(phi, phi_hat, m_cmp_clean)?;
    let mut grad = Array2::zeros(phi.dim());
    let mut boundary_hits = 0;
    for (axis, r) in [(0, &rt), (1, &rf)] {
        let n = T::from_usize_lossy(r.residual.len());
        // d/dδ̂ of ½·mean(wrap(w·δ - w·δ̂)²) is -w·r / N.
        let d_est = match &r.weight {
            None => r.residual.mapv(|v| -v / n),
            Some(w) => {
                // A weighted estimate jumps by 2πw when its own wrap flips.
                boundary_hits += r.est.iter().filter(|v| near_boundary(**v)).count();
                ndarray::Zip::from(&r.residual)
                    .and(w)
                    .map_collect(|v, w| -*v * *w / n)
            }
        };
        boundary_hits += r.residual.iter().filter(|v| near_boundary(**v)).count();
        scatter(&mut grad, d_est.view(), axis);
    }
    Ok(PhaseGradient {
        grad,
        boundary_hits,
    })
}

/// Analytic gradient of [`loss_upb`] with respect to `phi_hat`.
pub fn grad_loss_upb<T: Scalar>(
    phi: &PhaseSpectrogram<T>,
    phi_hat: &PhaseSpectrogram<T>,
) -> Result<PhaseGradient<T>> {
    gradient(phi, phi_hat, None)
}

/// Analytic gradient of [`loss_wupb`]; the clean-magnitude weights are constants.
pub fn grad_loss_wupb<T: Scalar>(
    phi: &PhaseSpectrogram<T>,
    phi_hat: &PhaseSpectrogram<T>,
    m_cmp_clean: &Array2<T>,
) -> Result<PhaseGradient<T>> {
    gradient(phi, phi_hat, Some(m_cmp_clean))
}

/// Evaluates every individually computable term for a clean/estimate pair.
///
/// Adversarial terms come from an external discriminator and are passed in.
pub fn evaluate_terms<T: Scalar>(
    clean: &Waveform<T>,
    estimate: &Waveform<T>,
    clean_spec: &ComplexSpectrogram<T>,
    est_spec: &ComplexSpectrogram<T>,
    c: T,
    adv_scores: Option<&[T]>,
    upb_adv_scores: Option<&[T]>,
) -> Result<LossTerms<T>> {
    let phi = crate::phasederiv::phase_of(clean_spec);
    let phi_hat = crate::phasederiv::phase_of(est_spec);
    let m = clean_spec.magnitude();
    let m_hat = est_spec.magnitude();
    let m_cmp = crate::phasederiv::compress(&m, c)?;
    Ok(LossTerms {
        mag: Some(loss_mag(&m, &m_hat, c)?),
        ri: Some(loss_ri(clean_spec, est_spec, c)?),
        time: Some(loss_time(clean, estimate)?),
        adv: adv_scores.map(loss_adv).transpose()?,
        upb: Some(loss_upb(&phi, &phi_hat)?),
        wupb: Some(loss_wupb(&phi, &phi_hat, &m_cmp)?),
        upb_adv: upb_adv_scores.map(loss_adv).transpose()?,
    })
}
