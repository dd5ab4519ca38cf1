use serde::{Deserialize, Serialize};

use super::ExperimentConfig;
use crate::counting::live_fraction;
use crate::error::{ensure, Error, Result};
use crate::quantum::bell_parameter;

/// Analytic expectation for a configuration: the accidental background acts
/// as white noise scaling every correlation by `V_max`, and dead time scales
/// the coincidence rate by the product of the live fractions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub v0: f64,
    pub v45: f64,
    pub s: f64,
    pub v_max: f64,
    pub brightness_per_min: f64,
    pub live_fraction_signal: f64,
    pub live_fraction_idler: f64,
}

pub fn predict(config: &ExperimentConfig) -> Result<Prediction> {
    let budget = config.rate_budget()?;
    let model = config.polarization_model()?;
    let live = |singles: f64, d: &crate::counting::DetectorParams| {
        live_fraction(singles * d.windows_per_gate() as f64, d.dead_gates())
    };
    let la = live(budget.singles_signal, &config.signal.detector);
    let lb = live(budget.singles_idler, &config.idler.detector);
    let v0 = model.v0 * budget.v_max;
    Ok(Prediction {
        v0,
        v45: v0 * model.eta,
        s: bell_parameter(v0, model.eta),
        v_max: budget.v_max,
        brightness_per_min: budget.brightness_per_min * la * lb,
        live_fraction_signal: la,
        live_fraction_idler: lb,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Calibration {
    pub config: ExperimentConfig,
    /// Insertion loss applied to each arm.
    pub insertion_loss_db: f64,
    pub prediction: Prediction,
}

fn with_loss(config: &ExperimentConfig, loss_db: f64) -> ExperimentConfig {
    let mut c = config.clone();
    c.signal.insertion_loss_db = loss_db;
    c.idler.insertion_loss_db = loss_db;
    c
}

/// `p0` giving the target brightness, or `None` if the low-gain regime ends first.
fn p0_for_brightness(config: &ExperimentConfig, target: f64) -> Result<Option<ExperimentConfig>> {
    let at = |p0: f64| {
        let mut c = config.clone();
        c.source.p0 = p0;
        (predict(&c).map(|p| p.brightness_per_min), c)
    };
    let (mut lo, mut hi) = (0.0, 1.0);
    loop {
        match at(hi).0 {
            Ok(b) if b >= target => break,
            Ok(_) => {
                lo = hi;
                hi *= 4.0;
                if hi > 1e18 {
                    return Ok(None);
                }
            }
            Err(Error::OutOfModel { .. }) => return Ok(None),
            Err(e) => return Err(e),
        }
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        match at(mid).0 {
            Ok(b) if b < target => lo = mid,
            _ => hi = mid,
        }
        if hi - lo <= 1e-12 * hi {
            break;
        }
    }
    Ok(Some(at(hi).1))
}

const MAX_INSERTION_LOSS_DB: f64 = 80.0;

/// Fits `p0` and a symmetric per-arm insertion loss so the analytic
/// prediction reproduces a target brightness and Bell parameter. Any fiber
/// already in the configuration is kept.
pub fn calibrate(config: &ExperimentConfig, target_brightness_per_min: f64, target_s: f64) -> Result<Calibration> {
    ensure(target_brightness_per_min > 0.0, || "target brightness must be positive".into())?;
    ensure(target_s > 0.0, || "target S must be positive".into())?;
    let solve = |loss: f64| -> Result<Option<(ExperimentConfig, Prediction)>> {
        match p0_for_brightness(&with_loss(config, loss), target_brightness_per_min)? {
            Some(c) => {
                let p = predict(&c)?;
                Ok(Some((c, p)))
            }
            None => Ok(None),
        }
    };
    let best = solve(0.0)?.ok_or_else(|| {
        Error::InvalidParameter("target brightness unreachable in the low-gain regime".into())
    })?;
    if best.1.s < target_s {
        return Err(Error::InvalidParameter(format!(
            "target S = {target_s} above the lossless prediction {:.4}",
            best.1.s
        )));
    }
    let (mut lo, mut hi) = (0.0, MAX_INSERTION_LOSS_DB);
    let mut found = best;
    for _ in 0..100 {
        let mid = 0.5 * (lo + hi);
        match solve(mid)? {
            Some((c, p)) if p.s >= target_s => {
                lo = mid;
                found = (c, p);
            }
            _ => hi = mid,
        }
        if hi - lo < 1e-9 {
            break;
        }
    }
    Ok(Calibration {
        config: found.0,
        insertion_loss_db: lo,
        prediction: found.1,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::counting::CountingMode;
    use crate::montecarlo::dtf_like_config;

    #[test]
    fn calibration_hits_targets() {
        let base = dtf_like_config(1.0, 3).unwrap();
        let cal = calibrate(&base, 540.0, 2.57).unwrap();
        assert!((cal.prediction.brightness_per_min - 540.0).abs() < 1e-6);
        assert!((cal.prediction.s - 2.57).abs() < 1e-6);
        assert!(cal.insertion_loss_db > 0.0);
        assert_eq!(cal.config.signal.insertion_loss_db, cal.insertion_loss_db);
    }

    #[test]
    fn unreachable_s_is_reported() {
        let mut base = dtf_like_config(1.0, 3).unwrap();
        base.source.baseline_v0 = 0.8;
        assert!(calibrate(&base, 540.0, 2.57).is_err());
    }

    #[test]
    fn paper_mode_prediction_is_accidental_werner() {
        let mut c = dtf_like_config(1.0, 3).unwrap();
        c.mode = CountingMode::Paper;
        c.source.p0 = 1e6;
        let p = predict(&c).unwrap();
        let b = c.rate_budget().unwrap();
        assert!((p.v0 - b.v_max).abs() < 1e-15);
        assert!((p.s - 2.0 * std::f64::consts::SQRT_2 * b.v_max).abs() < 1e-12);
        assert!(p.brightness_per_min < b.brightness_per_min);
    }
}
