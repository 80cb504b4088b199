//! Phase extraction, wrapped phase differences and the time/frequency phase
//! derivatives (TPD/FPD) built on them.

use ndarray::{s, Array2, Array3};

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::spectral::ComplexSpectrogram;

/// Weight denominators below this fall back to uniform weights.
const WEIGHT_FLOOR: f64 = 1e-12;

/// Maps any finite angle to its principal value in `(-π, π]`.
#[inline]
pub fn wrap<T: Scalar>(angle: T) -> T {
    let r = angle.sin().atan2(angle.cos());
    if r <= -T::PI() {
        T::PI()
    } else {
        r
    }
}

/// Principal value of `a - b` in `(-π, π]`.
///
/// `wrap_diff(-3π/4, 3π/4)` is `π/2`: stepping forward by a quarter turn from
/// `3π/4` lands on `-3π/4`.
#[inline]
pub fn wrap_diff<T: Scalar>(a: T, b: T) -> T {
    wrap(a - b)
}

/// Phase angles of a spectrogram, each in `(-π, π]`.
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseSpectrogram<T> {
    angles: Array2<T>,
}

impl<T: Scalar> PhaseSpectrogram<T> {
    /// Accepts angles already in `(-π, π]`.
    pub fn new(angles: Array2<T>) -> Result<Self> {
        for a in angles.iter() {
            if !a.is_finite() {
                return Err(Error::NonFinite("phase"));
            }
            if *a <= -T::PI() || *a > T::PI() {
                return Err(Error::OutOfRange {
                    what: "phase angle",
                    value: a.as_f64(),
                });
            }
        }
        Ok(PhaseSpectrogram { angles })
    }

    /// Wraps arbitrary finite angles into `(-π, π]`.
    pub fn wrapped(angles: Array2<T>) -> Result<Self> {
        if angles.iter().any(|a| !a.is_finite()) {
            return Err(Error::NonFinite("phase"));
        }
        Ok(PhaseSpectrogram {
            angles: angles.mapv(wrap),
        })
    }

    /// `wrap(φ + θ)` elementwise.
    pub fn biased(&self, theta: T) -> Self {
        PhaseSpectrogram {
            angles: self.angles.mapv(|a| wrap(a + theta)),
        }
    }

    pub fn angles(&self) -> &Array2<T> {
        &self.angles
    }

    pub fn into_angles(self) -> Array2<T> {
        self.angles
    }

    pub fn dim(&self) -> (usize, usize) {
        self.angles.dim()
    }
}

/// Wrapped TPD (`(T-1)×F`) and FPD (`T×(F-1)`).
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseDerivatives<T> {
    pub tpd: Array2<T>,
    pub fpd: Array2<T>,
}

/// TPD/FPD scaled by normalized magnitude weights.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightedPhaseDerivatives<T> {
    pub tpd: Array2<T>,
    pub fpd: Array2<T>,
    pub weight_sum_tpd: T,
    pub weight_sum_fpd: T,
}

/// Normalized pairwise-sum weights for the two derivative stencils.
#[derive(Debug, Clone, PartialEq)]
pub struct DerivativeWeights<T> {
    pub tpd: Array2<T>,
    pub fpd: Array2<T>,
}

/// Stacked discriminator input: padded TPD, padded FPD and magnitude, shape `3×T×F`.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscriminatorInput<T> {
    pub channels: Array3<T>,
}

impl<T: Scalar> DiscriminatorInput<T> {
    pub fn shape(&self) -> [usize; 3] {
        let (c, t, f) = self.channels.dim();
        [c, t, f]
    }
}

/// Elementwise argument in `(-π, π]`; exact zeros map to 0.
pub fn phase_of<T: Scalar>(spec: &ComplexSpectrogram<T>) -> PhaseSpectrogram<T> {
    let angles = spec.data().mapv(|c| {
        if c.re == T::zero() && c.im == T::zero() {
            T::zero()
        } else {
            let a = c.im.atan2(c.re);
            if a <= -T::PI() {
                T::PI()
            } else {
                a
            }
        }
    });
    PhaseSpectrogram { angles }
}

fn check_min_shape(rows: usize, cols: usize) -> Result<()> {
    if rows < 2 || cols < 2 {
        return Err(Error::DegenerateShape { rows, cols });
    }
    Ok(())
}

pub(crate) fn check_same_shape<A, B>(a: &Array2<A>, b: &Array2<B>) -> Result<()> {
    if a.dim() != b.dim() {
        return Err(Error::ShapeMismatch {
            expected: a.dim(),
            found: b.dim(),
        });
    }
    Ok(())
}

pub fn phase_derivatives<T: Scalar>(phi: &PhaseSpectrogram<T>) -> Result<PhaseDerivatives<T>> {
    let a = phi.angles();
    let (rows, cols) = a.dim();
    check_min_shape(rows, cols)?;
    let mut tpd = Array2::zeros((rows - 1, cols));
    ndarray::Zip::from(&mut tpd)
        .and(a.slice(s![1.., ..]))
        .and(a.slice(s![..-1, ..]))
        .for_each(|d, &next, &cur| *d = wrap_diff(next, cur));
    let mut fpd = Array2::zeros((rows, cols - 1));
    ndarray::Zip::from(&mut fpd)
        .and(a.slice(s![.., 1..]))
        .and(a.slice(s![.., ..-1]))
        .for_each(|d, &next, &cur| *d = wrap_diff(next, cur));
    Ok(PhaseDerivatives { tpd, fpd })
}

/// `|X|^c` elementwise, `c ∈ (0, 1]`.
pub fn compress_magnitude<T: Scalar>(spec: &ComplexSpectrogram<T>, c: T) -> Result<Array2<T>> {
    compress(&spec.magnitude(), c)
}

/// `m^c` elementwise on an already-computed magnitude matrix.
pub fn compress<T: Scalar>(magnitude: &Array2<T>, c: T) -> Result<Array2<T>> {
    if !(c > T::zero() && c <= T::one()) {
        return Err(Error::OutOfRange {
            what: "compression exponent",
            value: c.as_f64(),
        });
    }
    Ok(magnitude.mapv(|m| if m == T::zero() { T::zero() } else { m.powf(c) }))
}

fn normalize<T: Scalar>(mut num: Array2<T>) -> Array2<T> {
    let total: T = num.iter().copied().sum();
    if total < T::lit(WEIGHT_FLOOR) {
        let uniform = T::one() / T::from_usize_lossy(num.len());
        num.fill(uniform);
    } else {
        num.mapv_inplace(|v| v / total);
    }
    num
}

/// Weights `(m(t+1,f) + m(t,f)) / Σ(...)` and the frequency-axis analogue.
pub fn derivative_weights<T: Scalar>(m_cmp: &Array2<T>) -> Result<DerivativeWeights<T>> {
    let (rows, cols) = m_cmp.dim();
    check_min_shape(rows, cols)?;
    if m_cmp.iter().any(|v| !v.is_finite() || *v < T::zero()) {
        return Err(Error::OutOfRange {
            what: "compressed magnitude",
            value: m_cmp
                .iter()
                .find(|v| !v.is_finite() || **v < T::zero())
                .map(|v| v.as_f64())
                .unwrap_or(f64::NAN),
        });
    }
    let tpd = &m_cmp.slice(s![1.., ..]) + &m_cmp.slice(s![..-1, ..]);
    let fpd = &m_cmp.slice(s![.., 1..]) + &m_cmp.slice(s![.., ..-1]);
    Ok(DerivativeWeights {
        tpd: normalize(tpd),
        fpd: normalize(fpd),
    })
}

pub fn weighted_derivatives<T: Scalar>(
    phi: &PhaseSpectrogram<T>,
    m_cmp: &Array2<T>,
) -> Result<WeightedPhaseDerivatives<T>> {
    check_same_shape(phi.angles(), m_cmp)?;
    let d = phase_derivatives(phi)?;
    let w = derivative_weights(m_cmp)?;
    Ok(WeightedPhaseDerivatives {
        tpd: &d.tpd * &w.tpd,
        fpd: &d.fpd * &w.fpd,
        weight_sum_tpd: w.tpd.iter().copied().sum(),
        weight_sum_fpd: w.fpd.iter().copied().sum(),
    })
}

/// Zero-pads TPD with a final row and FPD with a final column, then stacks
/// them with `mag` into a `3×T×F` tensor.
pub fn assemble_disc_input<T: Scalar>(
    phi: &PhaseSpectrogram<T>,
    mag: &Array2<T>,
) -> Result<DiscriminatorInput<T>> {
    check_same_shape(phi.angles(), mag)?;
    let (rows, cols) = mag.dim();
    let d = phase_derivatives(phi)?;
    let mut channels = Array3::zeros((3, rows, cols));
    channels.slice_mut(s![0, ..rows - 1, ..]).assign(&d.tpd);
    channels.slice_mut(s![1, .., ..cols - 1]).assign(&d.fpd);
    channels.slice_mut(s![2, .., ..]).assign(mag);
    Ok(DiscriminatorInput { channels })
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;
    use num_complex::Complex;
    use std::f64::consts::PI;

    use crate::spectral::StftConfig;

    #[test]
    fn wrap_diff_examples() {
        assert_eq!(wrap_diff(1.3f64, 1.3), 0.0);
        assert!((wrap_diff(-3.0 * PI / 4.0, 3.0 * PI / 4.0) - PI / 2.0).abs() < 1e-12);
        assert!((wrap_diff(0.1f64, -0.1) - 0.2).abs() < 1e-12);
    }

    #[test]
    fn wrap_boundary_maps_to_plus_pi() {
        assert_eq!(wrap(PI), PI);
        assert_eq!(wrap(-PI), PI);
        assert!((wrap(3.0 * PI) - PI).abs() < 1e-12);
        assert!(wrap(-PI + 1e-9) > -PI);
    }

    #[test]
    fn phase_of_simple_cases() {
        let cfg = StftConfig::new(4, 2, 4, crate::spectral::WindowKind::Hann, 8).unwrap();
        let data = array![
            [Complex::new(1.0, 0.0), Complex::new(0.0, 1.0), Complex::new(0.0, 0.0)],
            [Complex::new(-1.0, -0.0), Complex::new(-0.0, -0.0), Complex::new(2.0, 0.0)]
        ];
        let spec = ComplexSpectrogram::new(data, cfg, None).unwrap();
        let p = phase_of(&spec);
        let a = p.angles();
        assert_eq!(a[[0, 0]], 0.0);
        assert!((a[[0, 1]] - PI / 2.0).abs() < 1e-15);
        assert_eq!(a[[0, 2]], 0.0);
        assert_eq!(a[[1, 0]], PI);
        assert_eq!(a[[1, 1]], 0.0);
    }

    #[test]
    fn derivatives_of_constant_and_ramp() {
        let c = PhaseSpectrogram::new(Array2::from_elem((4, 5), 0.7f64)).unwrap();
        let d = phase_derivatives(&c).unwrap();
        assert_eq!(d.tpd.dim(), (3, 5));
        assert_eq!(d.fpd.dim(), (4, 4));
        assert!(d.tpd.iter().chain(d.fpd.iter()).all(|v| *v == 0.0));

        let ramp = PhaseSpectrogram::wrapped(Array2::from_shape_fn((6, 3), |(t, _)| 0.3 * t as f64))
            .unwrap();
        let d = phase_derivatives(&ramp).unwrap();
        assert!(d.tpd.iter().all(|v| (v - 0.3).abs() < 1e-12));
        assert!(d.fpd.iter().all(|v| v.abs() < 1e-12));
    }

    #[test]
    fn degenerate_shapes_rejected() {
        let p = PhaseSpectrogram::new(Array2::<f64>::zeros((1, 5))).unwrap();
        assert!(matches!(
            phase_derivatives(&p),
            Err(Error::DegenerateShape { rows: 1, cols: 5 })
        ));
    }

    #[test]
    fn phase_spectrogram_range_checked() {
        assert!(PhaseSpectrogram::new(array![[-PI, 0.0], [0.0, 0.0]]).is_err());
        assert!(PhaseSpectrogram::new(array![[PI, 0.0], [0.0, 0.0]]).is_ok());
    }

    #[test]
    fn compression() {
        let m = array![[4.0f64, 0.0], [1.0, 9.0]];
        let c = compress(&m, 0.5).unwrap();
        assert_eq!(c, array![[2.0, 0.0], [1.0, 3.0]]);
        assert_eq!(compress(&m, 1.0).unwrap(), m);
        assert!(compress(&m, 0.0).is_err());
        assert!(compress(&m, 1.5).is_err());
    }

    #[test]
    fn uniform_magnitude_gives_uniform_weights() {
        let phi = PhaseSpectrogram::wrapped(Array2::from_shape_fn((3, 4), |(t, f)| {
            0.2 * t as f64 - 0.5 * f as f64
        }))
        .unwrap();
        let m = Array2::from_elem((3, 4), 2.5);
        let w = weighted_derivatives(&phi, &m).unwrap();
        let d = phase_derivatives(&phi).unwrap();
        let n_tpd = d.tpd.len() as f64;
        for (a, b) in w.tpd.iter().zip(d.tpd.iter()) {
            assert!((a - b / n_tpd).abs() < 1e-15);
        }
        assert!((w.weight_sum_tpd - 1.0).abs() < 1e-12);
        assert!((w.weight_sum_fpd - 1.0).abs() < 1e-12);
    }

    #[test]
    fn zero_magnitude_falls_back_to_uniform() {
        let w = derivative_weights(&Array2::<f64>::zeros((3, 3))).unwrap();
        assert!(w.tpd.iter().all(|v| (*v - 1.0 / 6.0).abs() < 1e-15));
        assert!(w.fpd.iter().all(|v| (*v - 1.0 / 6.0).abs() < 1e-15));
    }

    #[test]
    fn negative_magnitude_rejected() {
        let m = array![[1.0f64, -1.0], [1.0, 1.0]];
        assert!(derivative_weights(&m).is_err());
    }

    #[test]
    fn disc_input_layout() {
        let phi = PhaseSpectrogram::wrapped(Array2::from_shape_fn((4, 3), |(t, f)| {
            (t * 3 + f) as f64 * 0.9
        }))
        .unwrap();
        let mag = Array2::from_shape_fn((4, 3), |(t, f)| (t + f) as f64);
        let di = assemble_disc_input(&phi, &mag).unwrap();
        assert_eq!(di.shape(), [3, 4, 3]);
        let d = phase_derivatives(&phi).unwrap();
        assert!(di.channels.slice(s![0, 3, ..]).iter().all(|v| *v == 0.0));
        assert!(di.channels.slice(s![1, .., 2]).iter().all(|v| *v == 0.0));
        assert_eq!(di.channels.slice(s![0, ..3, ..]), d.tpd);
        assert_eq!(di.channels.slice(s![1, .., ..2]), d.fpd);
        assert_eq!(di.channels.slice(s![2, .., ..]), mag);
        assert!(assemble_disc_input(&phi, &Array2::zeros((4, 4))).is_err());
    }
}
