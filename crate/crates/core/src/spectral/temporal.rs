//! Fourier-limited temporal wavepackets and their PMD-shifted overlap.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use super::ChannelSpectrum;
use crate::error::{ensure, Error, Result};

const MIN_SAMPLES_PER_FWHM: f64 = 8.0;
const MIN_SPAN_PER_FWHM: f64 = 10.0;
const SPECTRAL_SAMPLES: usize = 4096;

/// Uniform time grid centred on zero.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimeGrid {
    pub spacing_ps: f64,
    pub span_ps: f64,
}

impl TimeGrid {
    /// Grid sized from the channel width: ~16 samples per Gaussian
    /// transform-limited FWHM, span of 80 FWHM.
    pub fn for_channel(channel: &ChannelSpectrum) -> Self {
        let fwhm_ps = 440.0 / channel.width_ghz().max(1e-6);
        Self {
            spacing_ps: fwhm_ps / 16.0,
            span_ps: 80.0 * fwhm_ps,
        }
    }

    fn points(&self) -> Result<(f64, usize)> {
        ensure(self.spacing_ps > 0.0 && self.span_ps > 0.0, || {
            "time grid spacing and span must be positive".into()
        })?;
        let half = (self.span_ps / 2.0 / self.spacing_ps).floor() as usize;
        ensure(half >= 1, || "time grid has fewer than three points".into())?;
        Ok((-(half as f64) * self.spacing_ps, 2 * half + 1))
    }
}

/// L2-normalized amplitude profile `f(t)` (units 1/√ps) on a uniform grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TemporalProfile {
    start_ps: f64,
    spacing_ps: f64,
    amplitude: Vec<f64>,
}

const GRID_SLACK: f64 = 1e-9;

impl TemporalProfile {
    /// Builds a profile from raw samples and normalizes it.
    pub fn from_samples(start_ps: f64, spacing_ps: f64, samples: Vec<f64>) -> Result<Self> {
        ensure(spacing_ps > 0.0, || "profile spacing must be positive".into())?;
        let norm = (samples.iter().map(|a| a * a).sum::<f64>() * spacing_ps).sqrt();
        if norm <= 0.0 || !norm.is_finite() {
            return Err(Error::DegenerateInput("profile has zero norm".into()));
        }
        Ok(Self {
            start_ps,
            spacing_ps,
            amplitude: samples.into_iter().map(|a| a / norm).collect(),
        })
    }

    /// Gaussian wavepacket with the given intensity FWHM.
    pub fn gaussian(intensity_fwhm_ps: f64, grid: TimeGrid) -> Result<Self> {
        ensure(intensity_fwhm_ps > 0.0, || "FWHM must be positive".into())?;
        let (start, n) = grid.points()?;
        // Intensity rms σ; amplitude is exp(-t² / 4σ²).
        let sigma = intensity_fwhm_ps / super::FWHM_PER_SIGMA;
        let samples = (0..n)
            .map(|k| {
                let t = start + k as f64 * grid.spacing_ps;
                (-t * t / (4.0 * sigma * sigma)).exp()
            })
            .collect();
        let profile = Self::from_samples(start, grid.spacing_ps, samples)?;
        profile.check_resolution()?;
        Ok(profile)
    }

    pub fn spacing_ps(&self) -> f64 {
        self.spacing_ps
    }

    pub fn span_ps(&self) -> f64 {
        self.spacing_ps * (self.amplitude.len() - 1) as f64
    }

    pub fn times_ps(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.amplitude.len()).map(|k| self.start_ps + k as f64 * self.spacing_ps)
    }

    pub fn amplitude(&self) -> &[f64] {
        &self.amplitude
    }

    /// Σ f² Δt.
    pub fn norm_squared(&self) -> f64 {
        self.amplitude.iter().map(|a| a * a).sum::<f64>() * self.spacing_ps
    }

    /// Linear interpolation; zero off the grid.
    pub fn value_at(&self, t_ps: f64) -> f64 {
        let n = self.amplitude.len();
        let last = (n - 1) as f64;
        let x = (t_ps - self.start_ps) / self.spacing_ps;
        // Rounding can push a grid-end time just outside the grid.
        if !(-GRID_SLACK..=last + GRID_SLACK).contains(&x) {
            return 0.0;
        }
        let x = x.clamp(0.0, last);
        let k = x.floor() as usize;
        if k + 1 >= n {
            return self.amplitude[n - 1];
        }
        let frac = x - k as f64;
        self.amplitude[k] * (1.0 - frac) + self.amplitude[k + 1] * frac
    }

    /// Full width at half maximum of the intensity `f²`.
    pub fn intensity_fwhm_ps(&self) -> f64 {
        let intensity: Vec<f64> = self.amplitude.iter().map(|a| a * a).collect();
        let (peak_idx, &peak) = intensity
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.total_cmp(b.1))
            .expect("profile is non-empty");
        let half = peak / 2.0;
        let crossing = |indices: &mut dyn Iterator<Item = usize>, step: isize| -> f64 {
            for k in indices {
                if intensity[k] < half {
                    let inner = (k as isize - step) as usize;
                    let (y0, y1) = (intensity[inner], intensity[k]);
                    let frac = (y0 - half) / (y0 - y1);
                    return (inner as f64 + step as f64 * frac) * self.spacing_ps;
                }
            }
            let edge = if step > 0 { intensity.len() - 1 } else { 0 };
            edge as f64 * self.spacing_ps
        };
        let right = crossing(&mut (peak_idx + 1..intensity.len()), 1);
        let left = crossing(&mut (0..peak_idx).rev(), -1);
        right - left
    }

    fn check_resolution(&self) -> Result<()> {
        let fwhm = self.intensity_fwhm_ps();
        let samples = fwhm / self.spacing_ps;
        if samples < MIN_SAMPLES_PER_FWHM {
            return Err(Error::Resolution(format!(
                "{samples:.1} samples across a {fwhm:.3} ps FWHM; need at least {MIN_SAMPLES_PER_FWHM}"
            )));
        }
        if self.span_ps() < MIN_SPAN_PER_FWHM * fwhm {
            return Err(Error::Resolution(format!(
                "span {:.2} ps is shorter than {MIN_SPAN_PER_FWHM} × FWHM ({fwhm:.3} ps)",
                self.span_ps()
            )));
        }
        Ok(())
    }
}

/// Magnitude of the Fourier transform of the amplitude spectrum `√τ`,
/// normalized to unit L2 norm.
pub fn temporal_profile(channel: &ChannelSpectrum, grid: TimeGrid) -> Result<TemporalProfile> {
    let (start, n_t) = grid.points()?;

    // Frequency nodes (THz offsets) including every breakpoint so that
    // discontinuities fall on nodes; trapezoid weights on the merged grid.
    let (lo, hi) = channel.band_offsets_ghz();
    let mut nodes: Vec<f64> = (0..=SPECTRAL_SAMPLES)
        .map(|k| lo + (hi - lo) * k as f64 / SPECTRAL_SAMPLES as f64)
        .collect();
    nodes.extend(channel.breakpoints_ghz());
    nodes.sort_by(f64::total_cmp);
    nodes.dedup_by(|a, b| (*a - *b).abs() < 1e-12);

    // One-sided values at each panel's ends so jumps fall between panels.
    let mut weights = vec![0.0; nodes.len()];
    for k in 0..nodes.len() - 1 {
        let (a, b) = (nodes[k], nodes[k + 1]);
        let eps = 1e-9 * (b - a);
        let h = (b - a) / 1000.0;
        weights[k] += 0.5 * h * channel.tau_offset(a + eps).sqrt();
        weights[k + 1] += 0.5 * h * channel.tau_offset(b - eps).sqrt();
    }
    let freqs_thz: Vec<f64> = nodes.iter().map(|u| u / 1000.0).collect();

    let samples: Vec<f64> = (0..n_t)
        .map(|j| {
            let t = start + j as f64 * grid.spacing_ps;
            let (mut re, mut im) = (0.0, 0.0);
            for (&nu, &w) in freqs_thz.iter().zip(&weights) {
                let (s, c) = (2.0 * PI * nu * t).sin_cos();
                re += w * c;
                im += w * s;
            }
            re.hypot(im)
        })
        .collect();

    let profile = TemporalProfile::from_samples(start, grid.spacing_ps, samples)?;
    profile.check_resolution()?;
    Ok(profile)
}

/// `η(τ) = ∫ f_s(t) f_i(τ − t) dt`, with the idler profile interpolated onto
/// the signal grid.
pub fn pmd_overlap(signal: &TemporalProfile, idler: &TemporalProfile, tau_pmd_ps: f64) -> f64 {
    let sum: f64 = signal
        .times_ps()
        .zip(signal.amplitude())
        .map(|(t, &fs)| fs * idler.value_at(tau_pmd_ps - t))
        .sum();
    (sum * signal.spacing_ps).clamp(0.0, 1.0)
}

/// Smallest non-negative delay at which the overlap drops to `eta`.
pub fn pmd_delay_for_overlap(signal: &TemporalProfile, idler: &TemporalProfile, eta: f64) -> Result<f64> {
    ensure((0.0..=1.0).contains(&eta), || format!("η = {eta} outside [0, 1]"))?;
    let at_zero = pmd_overlap(signal, idler, 0.0);
    if eta >= at_zero {
        return Ok(0.0);
    }
    let mut hi = signal.spacing_ps;
    let limit = signal.span_ps().max(idler.span_ps());
    while pmd_overlap(signal, idler, hi) > eta {
        hi *= 2.0;
        if hi > limit {
            return Err(Error::InsufficientData(format!(
                "overlap stays above {eta} across the {limit:.1} ps grid"
            )));
        }
    }
    let mut lo = 0.0;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if pmd_overlap(signal, idler, mid) > eta {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo < 1e-12 {
            break;
        }
    }
    Ok(0.5 * (lo + hi))
}
