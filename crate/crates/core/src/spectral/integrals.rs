use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use super::{ChannelShape, ChannelSpectrum};
use crate::error::{Error, Result};
use crate::quadrature::{integrate, trapezoid, QuadratureOptions};

/// Spectral measures of one signal/idler channel pair.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PairOverlap {
    pub i1_signal: f64,
    pub i1_idler: f64,
    pub i2: f64,
    pub zeta_q: f64,
}

fn quad_options(extra_breakpoints: usize) -> QuadratureOptions {
    QuadratureOptions {
        abs_tol: 1e-10,
        max_intervals: 4000 + 2 * extra_breakpoints,
    }
}

/// `(1/2π) ∫ τ(ν − ν_C) dν` over the channel band, in GHz.
pub fn integral_i1(channel: &ChannelSpectrum) -> Result<f64> {
    let (lo, hi) = channel.band_offsets_ghz();
    let area = match channel.shape() {
        ChannelShape::Tabulated(_) => {
            let mut xs = channel.breakpoints_ghz();
            xs.sort_by(f64::total_cmp);
            xs.dedup();
            let ys: Vec<f64> = xs.iter().map(|&u| channel.tau_offset(u)).collect();
            trapezoid(&xs, &ys)
        }
        _ => {
            let bps = channel.breakpoints_ghz();
            integrate(|u| channel.tau_offset(u), lo, hi, &bps, quad_options(bps.len()))?.value
        }
    };
    Ok(area / (2.0 * PI))
}

/// Joint spectral overlap of a channel pair for pump frequency `pump_thz`:
/// `(1/2π) ∫ τ_s(ν_s − ν_sC) τ_i(ν_p − ν_s − ν_iC) dν_s`, in GHz.
///
/// Only the detuning `ν_p − ν_sC − ν_iC` enters, so the overlap peaks when the
/// pair is symmetric about `ν_p / 2`.
pub fn integral_i2(signal: &ChannelSpectrum, idler: &ChannelSpectrum, pump_thz: f64) -> Result<f64> {
    let detuning_ghz = (pump_thz - signal.center_thz() - idler.center_thz()) * 1000.0;
    let max_detuning = 2.0 * signal.band_span_ghz().max(idler.band_span_ghz());
    if !detuning_ghz.is_finite() || detuning_ghz.abs() > max_detuning {
        return Err(Error::InvalidParameter(format!(
            "pump {pump_thz} THz detuned by {detuning_ghz:.1} GHz from the pair sum, beyond {max_detuning:.1} GHz"
        )));
    }

    // Integration variable: signal offset u; idler offset is detuning − u.
    let (s_lo, s_hi) = signal.band_offsets_ghz();
    let (i_lo, i_hi) = idler.band_offsets_ghz();
    let lo = s_lo.max(detuning_ghz - i_hi);
    let hi = s_hi.min(detuning_ghz - i_lo);
    if hi - lo <= 1e-9 * (s_hi - s_lo) {
        return Ok(0.0);
    }

    let mut bps = signal.breakpoints_ghz();
    bps.extend(idler.breakpoints_ghz().into_iter().map(|w| detuning_ghz - w));
    let integrand = |u: f64| signal.tau_offset(u) * idler.tau_offset(detuning_ghz - u);
    let value = integrate(integrand, lo, hi, &bps, quad_options(bps.len()))?.value;
    Ok(value / (2.0 * PI))
}

/// `ζ_Q = I2² / (I1_s · I1_i) · T_s · T_i`.
pub fn quality_factor(signal: &ChannelSpectrum, idler: &ChannelSpectrum, pump_thz: f64) -> Result<f64> {
    pair_overlap(signal, idler, pump_thz).map(|o| o.zeta_q)
}

pub fn pair_overlap(signal: &ChannelSpectrum, idler: &ChannelSpectrum, pump_thz: f64) -> Result<PairOverlap> {
    let i1_signal = integral_i1(signal)?;
    let i1_idler = integral_i1(idler)?;
    if i1_signal <= 0.0 || i1_idler <= 0.0 {
        return Err(Error::DegenerateChannel(format!(
            "empty band: I1_signal = {i1_signal}, I1_idler = {i1_idler}"
        )));
    }
    let i2 = integral_i2(signal, idler, pump_thz)?;
    let zeta_q = i2 * i2 / (i1_signal * i1_idler) * signal.peak_transmission() * idler.peak_transmission();
    Ok(PairOverlap {
        i1_signal,
        i1_idler,
        i2,
        zeta_q,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::{make_channel, ShapeKind, TabulatedCurve};

    const NU: f64 = 192.4;
    const SIGMA_PER_FWHM: f64 = 1.0 / 2.354_820_045_030_949_3;
    // Band margin placing the edges at ±5σ for a Gaussian.
    const FIVE_SIGMA_MARGIN: f64 = 10.0 * SIGMA_PER_FWHM;

    fn rect(center: f64, t: f64) -> ChannelSpectrum {
        make_channel(ShapeKind::Rectangular, center, 100.0, t, 1.0).unwrap()
    }

    #[test]
    fn i1_of_unit_rectangle() {
        let i1 = integral_i1(&rect(NU, 1.0)).unwrap();
        assert!((i1 - 100.0 / (2.0 * PI)).abs() < 1e-10);
        assert!((i1 - 15.915).abs() < 1e-3);
    }

    #[test]
    fn i1_of_gaussian_matches_closed_form() {
        let ch = make_channel(ShapeKind::Gaussian, NU, 100.0, 1.0, FIVE_SIGMA_MARGIN).unwrap();
        let sigma = 100.0 * SIGMA_PER_FWHM;
        let erf5 = 0.999_999_426_696_856_3; // erf(5/√2)
        let exact = sigma * (2.0 * PI).sqrt() * erf5 / (2.0 * PI);
        let i1 = integral_i1(&ch).unwrap();
        assert!((i1 - exact).abs() < 1e-9, "{i1} vs {exact}");
        assert!((i1 - 16.94).abs() < 5e-3);
    }

    #[test]
    fn i1_independent_of_peak_transmission() {
        let a = integral_i1(&rect(NU, 1.0)).unwrap();
        let b = integral_i1(&rect(NU, 0.5)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn i2_rectangles_symmetric_equals_i1() {
        let s = rect(192.3, 1.0);
        let i = rect(192.5, 1.0);
        let i2 = integral_i2(&s, &i, 384.8).unwrap();
        assert!((i2 - 100.0 / (2.0 * PI)).abs() < 1e-9);
    }

    #[test]
    fn i2_rectangles_half_detuned() {
        // δ = Δ/2 = 50 GHz → overlap length Δ − δ.
        let s = rect(192.3, 1.0);
        let i = rect(192.5, 1.0);
        let i2 = integral_i2(&s, &i, 384.85).unwrap();
        assert!((i2 - 50.0 / (2.0 * PI)).abs() < 1e-9);
    }

    #[test]
    fn i2_rectangles_disjoint_is_zero() {
        let s = rect(192.3, 1.0);
        let i = rect(192.5, 1.0);
        assert_eq!(integral_i2(&s, &i, 384.9).unwrap(), 0.0);
        assert_eq!(integral_i2(&s, &i, 384.7).unwrap(), 0.0);
    }

    #[test]
    fn pump_far_from_pair_rejected() {
        let s = rect(192.3, 1.0);
        let i = rect(192.5, 1.0);
        assert!(integral_i2(&s, &i, 390.0).is_err());
    }

    #[test]
    fn zeta_rectangles_is_unity() {
        let z = quality_factor(&rect(192.3, 1.0), &rect(192.5, 1.0), 384.8).unwrap();
        assert!((z - 1.0).abs() < 1e-9);
    }

    #[test]
    fn zeta_gaussians_is_half() {
        let g = |c| make_channel(ShapeKind::Gaussian, c, 100.0, 1.0, FIVE_SIGMA_MARGIN).unwrap();
        let z = quality_factor(&g(192.3), &g(192.5), 384.8).unwrap();
        assert!((z - 0.5).abs() < 1e-3, "{z}");
    }

    #[test]
    fn zeta_scales_with_transmissions() {
        let z = quality_factor(&rect(192.3, 0.5), &rect(192.5, 0.5), 384.8).unwrap();
        assert!((z - 0.25).abs() < 1e-9);
    }

    #[test]
    fn tabulated_rectangle_like_curve() {
        // Trapezoid-shaped tabulated curve: 10 GHz ramps, 90 GHz plateau.
        let xs: Vec<f64> = (0..=22).map(|k| 192.29 + 0.01 * k as f64).collect();
        let ys: Vec<f64> = xs
            .iter()
            .map(|&x| {
                let d = ((x - 192.4) * 1000.0).abs();
                if d <= 45.0 {
                    0.9
                } else if d >= 55.0 {
                    0.0
                } else {
                    0.9 * (55.0 - d) / 10.0
                }
            })
            .collect();
        let ch = ChannelSpectrum::tabulated(192.4, TabulatedCurve::new(xs, ys).unwrap()).unwrap();
        // 90 GHz plateau plus two 10 GHz triangles of height 1.
        let i1 = integral_i1(&ch).unwrap();
        assert!((i1 - 100.0 / (2.0 * PI)).abs() < 1e-6, "{i1}");
        assert!((ch.peak_transmission() - 0.9).abs() < 1e-12);
    }

    #[test]
    fn empty_overlap_reports_degenerate() {
        // A band that only covers the zero tail of a tabulated curve.
        let xs = vec![192.3, 192.35, 192.4, 192.45, 192.5];
        let ys = vec![0.0, 0.0, 0.0, 0.0, 1.0];
        let ch = ChannelSpectrum::tabulated(192.4, TabulatedCurve::new(xs, ys).unwrap())
            .unwrap()
            .with_band(192.3, 192.44)
            .unwrap();
        let err = pair_overlap(&ch, &ch, 384.8).unwrap_err();
        assert!(matches!(err, Error::DegenerateChannel(_)));
    }
}
