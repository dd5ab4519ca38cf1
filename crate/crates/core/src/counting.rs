//! Analytic singles, true and accidental coincidence budget.
//!
//! Bookkeeping: every probability here is per coincidence window `G_T` and
//! per analyzer setting, i.e. for a photon that has already passed its
//! polarization analyzer. There are `K_T / G_T` windows per second. With that
//! convention the low-gain expressions
//!
//! ```text
//! P_i  = p0 I1_i T_i K_T G_T
//! P_AC = p0² I1_A I1_B T_A T_B K_T² G_T²     (= P_A · P_B)
//! P_TC = p0 I2 T_A T_B K_T G_T
//! ```
//!
//! give `V_max = 1 / (1 + 2 P_AC / P_TC)` for the fringe contrast of a
//! maximally entangled source. The per-second singles density `p0 I1 T K_T`
//! is `P_i / G_T`.
//!
//! [`CountingMode::Paper`] uses exactly those expressions. [`CountingMode::Full`]
//! multiplies each photon detection by the detector efficiency and adds dark
//! counts, which enter `P_AC` through the dark–dark and dark–photon terms.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{ensure, Error, Result};
use crate::spectral::PairOverlap;

const LOW_GAIN_LIMIT: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SourceParams {
    /// Pair generation density, pairs per second per GHz of spectral measure.
    pub p0: f64,
    pub pump_frequency_thz: f64,
    pub baseline_v0: f64,
}

impl SourceParams {
    pub fn new(p0: f64, pump_frequency_thz: f64, baseline_v0: f64) -> Result<Self> {
        let s = Self {
            p0,
            pump_frequency_thz,
            baseline_v0,
        };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        ensure(self.p0 >= 0.0 && self.p0.is_finite(), || format!("p0 = {} must be ≥ 0", self.p0))?;
        ensure(self.pump_frequency_thz > 0.0, || "pump frequency must be positive".into())?;
        ensure((0.0..=1.0).contains(&self.baseline_v0), || {
            format!("baseline V0 = {} outside [0, 1]", self.baseline_v0)
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DetectorParams {
    pub quantum_efficiency: f64,
    pub trigger_rate_hz: f64,
    pub gate_width_s: f64,
    /// Non-paralyzable blind time after each registered click.
    pub dead_time_s: f64,
    /// Observed dark counts per second under gated operation.
    pub dark_count_rate_hz: f64,
    pub coincidence_window_s: f64,
}

impl DetectorParams {
    /// Gated InGaAs APDs: 10 % efficiency, 2 MHz trigger, 20 ns gates,
    /// 10 µs dead time, 500 dark counts/s, 1 ns coincidence window.
    pub fn gated_ingaas() -> Self {
        Self {
            quantum_efficiency: 0.10,
            trigger_rate_hz: 2.0e6,
            gate_width_s: 20e-9,
            dead_time_s: 10e-6,
            dark_count_rate_hz: 500.0,
            coincidence_window_s: 1e-9,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let all = [
            self.quantum_efficiency,
            self.trigger_rate_hz,
            self.gate_width_s,
            self.dead_time_s,
            self.dark_count_rate_hz,
            self.coincidence_window_s,
        ];
        ensure(all.iter().all(|v| *v >= 0.0 && v.is_finite()), || {
            "detector parameters must be non-negative".into()
        })?;
        ensure(self.quantum_efficiency <= 1.0, || "quantum efficiency above 1".into())?;
        ensure(self.trigger_rate_hz > 0.0 && self.gate_width_s > 0.0, || {
            "trigger rate and gate width must be positive".into()
        })?;
        ensure(self.duty() <= 1.0, || "trigger period shorter than the gate".into())?;
        ensure(
            self.coincidence_window_s > 0.0 && self.coincidence_window_s <= self.gate_width_s,
            || "coincidence window must be positive and no longer than the gate".into(),
        )?;
        ensure(self.dark_count_rate_hz <= self.trigger_rate_hz, || {
            "more than one dark count per gate".into()
        })
    }

    /// `K_T`: gate-open time per second.
    pub fn duty(&self) -> f64 {
        self.trigger_rate_hz * self.gate_width_s
    }

    /// Whole coincidence windows per gate.
    pub fn windows_per_gate(&self) -> u64 {
        ((self.gate_width_s / self.coincidence_window_s) * (1.0 + 1e-9)).floor().max(1.0) as u64
    }

    pub fn windows_per_second(&self) -> f64 {
        self.trigger_rate_hz * self.windows_per_gate() as f64
    }

    pub fn dark_probability_per_window(&self) -> f64 {
        self.dark_count_rate_hz / self.windows_per_second()
    }

    /// Gates blinded after each registered click.
    pub fn dead_gates(&self) -> u64 {
        (self.dead_time_s * self.trigger_rate_hz * (1.0 - 1e-9)).ceil().max(0.0) as u64
    }

    fn same_gating(&self, other: &Self) -> bool {
        let close = |a: f64, b: f64| (a - b).abs() <= 1e-12 * a.abs().max(b.abs());
        close(self.trigger_rate_hz, other.trigger_rate_hz)
            && close(self.gate_width_s, other.gate_width_s)
            && close(self.coincidence_window_s, other.coincidence_window_s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CountingMode {
    /// Appendix-style expressions only: unit efficiency, no dark counts.
    Paper,
    /// Detector efficiency and dark counts included.
    Full,
}

impl std::str::FromStr for CountingMode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "paper" => Ok(Self::Paper),
            "full" => Ok(Self::Full),
            other => Err(Error::InvalidParameter(format!("unknown mode `{other}` (paper|full)"))),
        }
    }
}

/// Spectral measure and end-to-end peak transmission of one arm.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ArmView {
    pub i1: f64,
    pub transmission: f64,
}

/// Spectral measures and transmissions of a channel pair.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PairView {
    pub signal: ArmView,
    pub idler: ArmView,
    pub i2: f64,
}

impl PairView {
    pub fn new(overlap: &PairOverlap, transmission_signal: f64, transmission_idler: f64) -> Self {
        Self {
            signal: ArmView {
                i1: overlap.i1_signal,
                transmission: transmission_signal,
            },
            idler: ArmView {
                i1: overlap.i1_idler,
                transmission: transmission_idler,
            },
            i2: overlap.i2,
        }
    }
}

pub(crate) fn efficiency(detector: &DetectorParams, mode: CountingMode) -> f64 {
    match mode {
        CountingMode::Paper => 1.0,
        CountingMode::Full => detector.quantum_efficiency,
    }
}

pub(crate) fn dark(detector: &DetectorParams, mode: CountingMode) -> f64 {
    match mode {
        CountingMode::Paper => 0.0,
        CountingMode::Full => detector.dark_probability_per_window(),
    }
}

fn check_regime(quantity: &'static str, value: f64) -> Result<f64> {
    if value > LOW_GAIN_LIMIT {
        Err(Error::OutOfModel {
            quantity,
            value,
            limit: LOW_GAIN_LIMIT,
        })
    } else {
        Ok(value)
    }
}

/// Photon part of the per-window singles probability, before dark counts.
pub(crate) fn photon_singles(source: &SourceParams, arm: ArmView, detector: &DetectorParams, mode: CountingMode) -> f64 {
    source.p0 * arm.i1 * arm.transmission * detector.duty() * detector.coincidence_window_s * efficiency(detector, mode)
}

/// Per-window probability of a registered count behind the analyzer.
pub fn singles_probability(
    source: &SourceParams,
    arm: ArmView,
    detector: &DetectorParams,
    mode: CountingMode,
) -> Result<f64> {
    check_regime("singles probability", photon_singles(source, arm, detector, mode) + dark(detector, mode))
}

/// `(P_TC, P_AC)` per coincidence window.
pub fn coincidence_probabilities(
    source: &SourceParams,
    pair: &PairView,
    detector_a: &DetectorParams,
    detector_b: &DetectorParams,
    mode: CountingMode,
) -> Result<(f64, f64)> {
    ensure(detector_a.same_gating(detector_b), || {
        "both arms must share trigger, gate and coincidence window".into()
    })?;
    let s_a = singles_probability(source, pair.signal, detector_a, mode)?;
    let s_b = singles_probability(source, pair.idler, detector_b, mode)?;
    let p_tc = source.p0
        * pair.i2
        * pair.signal.transmission
        * pair.idler.transmission
        * detector_a.duty()
        * detector_a.coincidence_window_s
        * efficiency(detector_a, mode)
        * efficiency(detector_b, mode);
    Ok((check_regime("true coincidence probability", p_tc)?, s_a * s_b))
}

/// `1 / (1 + 2 P_AC / P_TC)`.
pub fn max_visibility(p_ac: f64, p_tc: f64) -> Result<f64> {
    if p_tc <= 0.0 {
        return Err(Error::UndefinedVisibility);
    }
    Ok(1.0 / (1.0 + 2.0 * p_ac / p_tc))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RateBudget {
    pub singles_signal: f64,
    pub singles_idler: f64,
    pub p_ac: f64,
    pub p_tc: f64,
    pub v_max: f64,
    /// True coincidences per minute at a maximum-fringe setting.
    pub brightness_per_min: f64,
}

pub fn rate_budget(
    source: &SourceParams,
    pair: &PairView,
    detector_a: &DetectorParams,
    detector_b: &DetectorParams,
    mode: CountingMode,
) -> Result<RateBudget> {
    let (p_tc, p_ac) = coincidence_probabilities(source, pair, detector_a, detector_b, mode)?;
    Ok(RateBudget {
        singles_signal: singles_probability(source, pair.signal, detector_a, mode)?,
        singles_idler: singles_probability(source, pair.idler, detector_b, mode)?,
        p_ac,
        p_tc,
        v_max: max_visibility(p_ac, p_tc)?,
        brightness_per_min: p_tc * detector_a.windows_per_second() * 60.0,
    })
}

/// Product-of-singles accidental estimate `S_A S_B G_T / (duration · K_T)`.
pub fn accidental_estimate(singles_a: u64, singles_b: u64, duration_s: f64, gating: &DetectorParams) -> Result<f64> {
    ensure(duration_s > 0.0, || "duration must be positive".into())?;
    let windows = duration_s * gating.windows_per_second();
    Ok(singles_a as f64 * singles_b as f64 / windows)
}

/// Raw coincidences minus the accidental estimate, floored at zero.
pub fn subtract_accidentals(
    singles_a: u64,
    singles_b: u64,
    raw_coincidences: u64,
    duration_s: f64,
    gating: &DetectorParams,
) -> Result<f64> {
    let acc = accidental_estimate(singles_a, singles_b, duration_s, gating)?;
    Ok((raw_coincidences as f64 - acc).max(0.0))
}

/// Fraction of gates a non-paralyzable detector is live for, given the
/// click probability per live gate.
pub fn live_fraction(click_probability_per_gate: f64, dead_gates: u64) -> f64 {
    1.0 / (1.0 + click_probability_per_gate * dead_gates as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SlopePoint {
    pub p0: f64,
    pub brightness_per_min: f64,
    /// `2 P_AC / P_TC = 1/V_max − 1`.
    pub accidental_ratio: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SlopeFit {
    /// Least-squares slope through the origin, per (coincidence/min).
    pub slope: f64,
    pub points: Vec<SlopePoint>,
}

const MIN_SLOPE_POINTS: usize = 5;

/// Sweeps `p0` and fits `2 P_AC / P_TC` against brightness through the origin.
/// Sweep points outside the low-gain regime are dropped.
pub fn slope_quality(
    source: &SourceParams,
    p0_values: &[f64],
    pair: &PairView,
    detector_a: &DetectorParams,
    detector_b: &DetectorParams,
    mode: CountingMode,
) -> Result<SlopeFit> {
    let points: Vec<SlopePoint> = p0_values
        .par_iter()
        .map(|&p0| {
            let src = SourceParams { p0, ..*source };
            rate_budget(&src, pair, detector_a, detector_b, mode).ok().and_then(|b| {
                (b.p_tc > 0.0).then(|| SlopePoint {
                    p0,
                    brightness_per_min: b.brightness_per_min,
                    accidental_ratio: 2.0 * b.p_ac / b.p_tc,
                })
            })
        })
        .collect::<Vec<_>>()
        .into_iter()
        .flatten()
        .collect();
    if points.len() < MIN_SLOPE_POINTS {
        return Err(Error::InsufficientData(format!(
            "{} valid sweep points, need at least {MIN_SLOPE_POINTS}",
            points.len()
        )));
    }
    let sxy: f64 = points.iter().map(|p| p.brightness_per_min * p.accidental_ratio).sum();
    let sxx: f64 = points.iter().map(|p| p.brightness_per_min.powi(2)).sum();
    Ok(SlopeFit { slope: sxy / sxx, points })
}
