use serde::{Deserialize, Serialize};

use super::{CountRecord, ExperimentConfig};
use crate::counting::RateBudget;
use crate::error::{Error, Result};
use crate::quantum::{estimate_eta, Measured, PolarizationModel};
use crate::spectral::PairOverlap;

/// One Table-1-style row of measured quantities.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BellResult {
    pub v0: Measured,
    pub v45: Measured,
    pub s: Measured,
    /// Accidental-subtracted coincidences per minute at the H/H and V/V settings.
    pub brightness_per_min: f64,
    /// `None` when V0 is not positive.
    pub eta: Option<Measured>,
}

/// A simulated run with everything it was derived from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BellRun {
    pub result: BellResult,
    pub records: Vec<CountRecord>,
    /// `None` when no true coincidences are expected.
    pub budget: Option<RateBudget>,
    pub model: PolarizationModel,
    pub overlap: PairOverlap,
}

fn find(records: &[CountRecord], alice: f64, bob: f64) -> Option<&CountRecord> {
    records.iter().find(|r| r.setting.matches(alice, bob))
}

fn require(records: &[CountRecord], alice: f64, bob: f64) -> Result<&CountRecord> {
    find(records, alice, bob)
        .ok_or_else(|| Error::InvalidParameter(format!("measurement plan lacks the setting ({alice}°, {bob}°)")))
}

/// `(P − M)/(P + M)` with Poisson uncertainty `√(4PM/(P+M)³)`; a zero count
/// on either side contributes as one count to the uncertainty.
fn contrast(plus: f64, minus: f64) -> Measured {
    let n = plus + minus;
    let sigma = (4.0 * plus.max(1.0) * minus.max(1.0) / n.powi(3)).sqrt();
    Measured::new((plus - minus) / n, sigma)
}

/// Contrast between the parallel and crossed settings of a basis pair
/// `{x, x + 90°}` on both arms.
fn visibility(records: &[CountRecord], basis_deg: f64) -> Result<Measured> {
    let (x, y) = (basis_deg, basis_deg + 90.0);
    let c = |a, b| require(records, a, b).map(|r| r.raw_coincidences as f64);
    let parallel = c(x, x)? + c(y, y)?;
    let crossed = c(x, y)? + c(y, x)?;
    if parallel + crossed == 0.0 {
        return Err(Error::InsufficientStatistics {
            reason: format!("no coincidences in the {basis_deg}° fringe settings"),
            partial: records.to_vec(),
        });
    }
    Ok(contrast(parallel, crossed))
}

fn correlator(records: &[CountRecord], a: f64, b: f64) -> Result<Measured> {
    let c = |x, y| require(records, x, y).map(|r| r.raw_coincidences as f64);
    let same = c(a, b)? + c(a + 90.0, b + 90.0)?;
    let opposite = c(a, b + 90.0)? + c(a + 90.0, b)?;
    if same + opposite == 0.0 {
        return Err(Error::InsufficientStatistics {
            reason: format!("no coincidences for the correlator at ({a}°, {b}°)"),
            partial: records.to_vec(),
        });
    }
    Ok(contrast(same, opposite))
}

/// Polarizer angles of the two CHSH settings per arm.
const CHSH_A: [f64; 2] = [0.0, 45.0];
const CHSH_B: [f64; 2] = [22.5, 67.5];

fn bell(records: &[CountRecord]) -> Result<Measured> {
    let e = |a, b| correlator(records, a, b);
    let terms = [
        (e(CHSH_A[0], CHSH_B[0])?, 1.0),
        (e(CHSH_A[0], CHSH_B[1])?, -1.0),
        (e(CHSH_A[1], CHSH_B[0])?, 1.0),
        (e(CHSH_A[1], CHSH_B[1])?, 1.0),
    ];
    let value = terms.iter().map(|(m, sign)| sign * m.value).sum();
    let sigma = terms.iter().map(|(m, _)| m.sigma * m.sigma).sum::<f64>().sqrt();
    Ok(Measured::new(value, sigma))
}

fn brightness(records: &[CountRecord]) -> Result<f64> {
    let rate = |a, b| require(records, a, b).map(|r| r.true_estimate() / r.duration_s * 60.0);
    Ok(0.5 * (rate(0.0, 0.0)? + rate(90.0, 90.0)?))
}

pub(crate) fn evaluate(config: &ExperimentConfig, records: Vec<CountRecord>) -> Result<BellRun> {
    let v0 = visibility(&records, 0.0)?;
    let v45 = visibility(&records, 45.0)?;
    let s = bell(&records)?;
    let result = BellResult {
        v0,
        v45,
        s,
        brightness_per_min: brightness(&records)?,
        eta: estimate_eta(v0, v45, s).ok().map(|e| e.combined),
    };
    Ok(BellRun {
        result,
        budget: match config.rate_budget() {
            Ok(b) => Some(b),
            Err(Error::UndefinedVisibility) => None,
            Err(e) => return Err(e),
        },
        model: config.polarization_model()?,
        overlap: config.overlap()?,
        records,
    })
}
