//! Demultiplexer channel spectra and the spectral/temporal overlap measures
//! derived from them.
//!
//! Frequencies are carried in THz for absolute positions (channel centers,
//! band edges, pump) and in GHz for offsets and widths. The spectral measures
//! `I1`, `I2` are reported in GHz.

mod csv;
mod integrals;
mod temporal;

pub use self::csv::{parse_spectrum_csv, write_spectrum_csv, SpectrumCsvError};
pub use integrals::{integral_i1, integral_i2, pair_overlap, quality_factor, PairOverlap};
pub use temporal::{pmd_delay_for_overlap, pmd_overlap, temporal_profile, TemporalProfile, TimeGrid};

use serde::{Deserialize, Serialize};

use crate::error::{ensure, Error, Result};

/// ITU 100 GHz grid: channel `n` sits at `190.0 + 0.1 n` THz.
pub fn itu_channel_frequency(channel: u32) -> f64 {
    190.0 + 0.1 * f64::from(channel)
}

pub const DEFAULT_FLAT_TOP_ORDER: u32 = 4;

const FWHM_PER_SIGMA: f64 = 2.354_820_045_030_949_3;

/// Analytic channel families accepted by [`make_channel`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ShapeKind {
    Rectangular,
    Gaussian,
    /// Super-Gaussian `exp(-(2u/w)^(2m))`.
    FlatTop { order: u32 },
}

/// Measured transmission samples on a strictly increasing frequency grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TabulatedCurve {
    frequencies_thz: Vec<f64>,
    transmission: Vec<f64>,
    peak: f64,
}

impl TabulatedCurve {
    pub fn new(frequencies_thz: Vec<f64>, transmission: Vec<f64>) -> Result<Self> {
        ensure(frequencies_thz.len() == transmission.len(), || {
            "frequency and transmission columns differ in length".into()
        })?;
        ensure(frequencies_thz.len() >= 2, || {
            "a tabulated curve needs at least two samples".into()
        })?;
        for (k, w) in frequencies_thz.windows(2).enumerate() {
            ensure(w[1] > w[0], || {
                format!("frequency grid not strictly increasing at sample {}", k + 1)
            })?;
        }
        for (k, &t) in transmission.iter().enumerate() {
            ensure((0.0..=1.0).contains(&t), || {
                format!("transmission {t} at sample {k} outside [0, 1]")
            })?;
        }
        let peak = transmission.iter().copied().fold(0.0, f64::max);
        if peak <= 0.0 {
            return Err(Error::DegenerateChannel(
                "tabulated curve has zero transmission everywhere".into(),
            ));
        }
        Ok(Self {
            frequencies_thz,
            transmission,
            peak,
        })
    }

    pub fn frequencies_thz(&self) -> &[f64] {
        &self.frequencies_thz
    }

    pub fn transmission(&self) -> &[f64] {
        &self.transmission
    }

    pub fn peak(&self) -> f64 {
        self.peak
    }

    /// Linearly interpolated physical transmission; zero off the grid.
    pub fn physical(&self, nu_thz: f64) -> f64 {
        let xs = &self.frequencies_thz;
        if nu_thz < xs[0] || nu_thz > xs[xs.len() - 1] {
            return 0.0;
        }
        let k = xs.partition_point(|&x| x <= nu_thz);
        if k == xs.len() {
            return self.transmission[xs.len() - 1];
        }
        let (x0, x1) = (xs[k - 1], xs[k]);
        let (y0, y1) = (self.transmission[k - 1], self.transmission[k]);
        y0 + (y1 - y0) * (nu_thz - x0) / (x1 - x0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum ChannelShape {
    Rectangular,
    Gaussian,
    FlatTop { order: u32 },
    Tabulated(TabulatedCurve),
}

/// One demultiplexer output channel.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelSpectrum {
    shape: ChannelShape,
    center_thz: f64,
    band_start_thz: f64,
    band_stop_thz: f64,
    peak_transmission: f64,
    width_ghz: f64,
    pmd_delay_ps: f64,
}

/// Builds an analytic channel with band edges at `center ± band_margin · width / 2`.
pub fn make_channel(
    shape: ShapeKind,
    center_thz: f64,
    width_ghz: f64,
    peak_transmission: f64,
    band_margin: f64,
) -> Result<ChannelSpectrum> {
    ensure(width_ghz > 0.0 && width_ghz.is_finite(), || {
        format!("channel width must be positive, got {width_ghz} GHz")
    })?;
    ensure(peak_transmission > 0.0 && peak_transmission <= 1.0, || {
        format!("peak transmission {peak_transmission} outside (0, 1]")
    })?;
    ensure(band_margin >= 1.0, || {
        format!("band margin must be at least 1, got {band_margin}")
    })?;
    ensure(center_thz > 0.0 && center_thz.is_finite(), || {
        format!("center frequency {center_thz} THz is not positive")
    })?;
    let shape = match shape {
        ShapeKind::Rectangular => ChannelShape::Rectangular,
        ShapeKind::Gaussian => ChannelShape::Gaussian,
        ShapeKind::FlatTop { order } => {
            ensure(order >= 1, || "flat-top order must be at least 1".into())?;
            ChannelShape::FlatTop { order }
        }
    };
    let half_band_thz = band_margin * width_ghz / 2.0 / 1000.0;
    Ok(ChannelSpectrum {
        shape,
        center_thz,
        band_start_thz: center_thz - half_band_thz,
        band_stop_thz: center_thz + half_band_thz,
        peak_transmission,
        width_ghz,
        pmd_delay_ps: 0.0,
    })
}

impl ChannelSpectrum {
    /// Wraps a measured curve. The peak transmission is the curve maximum and
    /// the band defaults to the sampled range.
    pub fn tabulated(center_thz: f64, curve: TabulatedCurve) -> Result<Self> {
        let xs = curve.frequencies_thz();
        let (start, stop) = (xs[0], xs[xs.len() - 1]);
        ensure(start < center_thz && center_thz < stop, || {
            format!("center {center_thz} THz outside the sampled range [{start}, {stop}] THz")
        })?;
        let peak = curve.peak();
        let mut channel = Self {
            shape: ChannelShape::Tabulated(curve),
            center_thz,
            band_start_thz: start,
            band_stop_thz: stop,
            peak_transmission: peak,
            width_ghz: 0.0,
            pmd_delay_ps: 0.0,
        };
        channel.width_ghz = channel.measured_fwhm_ghz();
        Ok(channel)
    }

    /// Narrows the integration band; it must still bracket the center and, for
    /// tabulated curves, stay inside the sampled range.
    pub fn with_band(mut self, start_thz: f64, stop_thz: f64) -> Result<Self> {
        ensure(start_thz < self.center_thz && self.center_thz < stop_thz, || {
            format!("band [{start_thz}, {stop_thz}] THz does not bracket the center")
        })?;
        if let ChannelShape::Tabulated(curve) = &self.shape {
            let xs = curve.frequencies_thz();
            ensure(start_thz >= xs[0] && stop_thz <= xs[xs.len() - 1], || {
                "band extends beyond the tabulated grid".into()
            })?;
        }
        self.band_start_thz = start_thz;
        self.band_stop_thz = stop_thz;
        Ok(self)
    }

    pub fn with_pmd_delay(mut self, pmd_delay_ps: f64) -> Self {
        self.pmd_delay_ps = pmd_delay_ps;
        self
    }

    /// Scales the peak transmission, e.g. to fold in fixed insertion loss.
    pub fn with_peak_transmission(mut self, peak_transmission: f64) -> Result<Self> {
        ensure(peak_transmission > 0.0 && peak_transmission <= 1.0, || {
            format!("peak transmission {peak_transmission} outside (0, 1]")
        })?;
        self.peak_transmission = peak_transmission;
        Ok(self)
    }

    pub fn shape(&self) -> &ChannelShape {
        &self.shape
    }
    pub fn center_thz(&self) -> f64 {
        self.center_thz
    }
    pub fn band_start_thz(&self) -> f64 {
        self.band_start_thz
    }
    pub fn band_stop_thz(&self) -> f64 {
        self.band_stop_thz
    }
    pub fn peak_transmission(&self) -> f64 {
        self.peak_transmission
    }
    pub fn width_ghz(&self) -> f64 {
        self.width_ghz
    }
    pub fn pmd_delay_ps(&self) -> f64 {
        self.pmd_delay_ps
    }

    /// Band edges as offsets from the center, in GHz.
    pub fn band_offsets_ghz(&self) -> (f64, f64) {
        (
            (self.band_start_thz - self.center_thz) * 1000.0,
            (self.band_stop_thz - self.center_thz) * 1000.0,
        )
    }

    pub fn band_span_ghz(&self) -> f64 {
        (self.band_stop_thz - self.band_start_thz) * 1000.0
    }

    /// Peak-normalized transmission at an offset (GHz) from the center.
    /// Zero outside the band.
    pub fn tau_offset(&self, offset_ghz: f64) -> f64 {
        let (lo, hi) = self.band_offsets_ghz();
        if offset_ghz < lo || offset_ghz > hi {
            return 0.0;
        }
        let w = self.width_ghz;
        match &self.shape {
            ChannelShape::Rectangular => {
                if offset_ghz.abs() <= w / 2.0 {
                    1.0
                } else {
                    0.0
                }
            }
            ChannelShape::Gaussian => {
                let sigma = w / FWHM_PER_SIGMA;
                (-offset_ghz * offset_ghz / (2.0 * sigma * sigma)).exp()
            }
            ChannelShape::FlatTop { order } => {
                let x = 2.0 * offset_ghz / w;
                (-(x * x).powi(*order as i32)).exp()
            }
            ChannelShape::Tabulated(curve) => {
                curve.physical(self.center_thz + offset_ghz / 1000.0) / curve.peak()
            }
        }
    }

    /// Peak-normalized transmission at an absolute frequency.
    pub fn tau(&self, nu_thz: f64) -> f64 {
        self.tau_offset((nu_thz - self.center_thz) * 1000.0)
    }

    /// Physical transmission `T · τ`.
    pub fn transmission(&self, nu_thz: f64) -> f64 {
        self.peak_transmission * self.tau(nu_thz)
    }

    /// Offsets (GHz) where `τ` is discontinuous or only piecewise smooth.
    pub(crate) fn breakpoints_ghz(&self) -> Vec<f64> {
        let (lo, hi) = self.band_offsets_ghz();
        let mut pts = vec![lo, hi];
        match &self.shape {
            ChannelShape::Rectangular => {
                pts.push(-self.width_ghz / 2.0);
                pts.push(self.width_ghz / 2.0);
            }
            ChannelShape::Tabulated(curve) => pts.extend(
                curve
                    .frequencies_thz()
                    .iter()
                    .map(|&f| (f - self.center_thz) * 1000.0),
            ),
            _ => {}
        }
        pts.retain(|&p| p >= lo && p <= hi);
        pts
    }

    fn measured_fwhm_ghz(&self) -> f64 {
        let (lo, hi) = self.band_offsets_ghz();
        let n = 20_000;
        let step = (hi - lo) / n as f64;
        let above: Vec<f64> = (0..=n)
            .map(|k| lo + k as f64 * step)
            .filter(|&u| self.tau_offset(u) >= 0.5)
            .collect();
        match (above.first(), above.last()) {
            (Some(a), Some(b)) => (b - a).max(step),
            _ => step,
        }
    }
}
