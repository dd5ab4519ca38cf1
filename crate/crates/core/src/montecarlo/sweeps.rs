use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{run_bell_experiment, ExperimentConfig};
use crate::error::{ensure, Result};
use crate::quantum::{bell_parameter, Measured};
use crate::spectral::ChannelSpectrum;

/// A device's channel pair entering the quality-factor sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DevicePair {
    pub label: String,
    pub signal: ChannelSpectrum,
    pub idler: ChannelSpectrum,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Figure2Row {
    pub label: String,
    pub zeta_q: f64,
    pub v0: Measured,
}

/// Simulated natural-basis visibility against ζ_Q for each device pair, all at
/// the same `p0` and otherwise the settings of `base`.
pub fn sweep_figure2(devices: &[DevicePair], base: &ExperimentConfig, p0: f64) -> Result<Vec<Figure2Row>> {
    ensure(!devices.is_empty(), || "no devices to sweep".into())?;
    devices
        .par_iter()
        .map(|d| {
            let mut c = base.clone();
            c.source.p0 = p0;
            c.signal.channel = d.signal.clone();
            c.idler.channel = d.idler.clone();
            let run = run_bell_experiment(&c)?;
            Ok(Figure2Row {
                label: d.label.clone(),
                zeta_q: run.overlap.zeta_q,
                v0: run.result.v0,
            })
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Figure3Kind {
    Grid,
    Measured,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Figure3Row {
    pub kind: Figure3Kind,
    pub label: String,
    pub v0: f64,
    pub eta: f64,
    pub s: f64,
}

/// A measured channel-pair point drawn over the contour.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OverlayPoint {
    pub label: String,
    pub v0: f64,
    pub eta: f64,
    pub s: f64,
}

/// `S(V0, η)` on the grid (V0 outer, η inner), then the overlay points.
pub fn sweep_figure3(v0_grid: &[f64], eta_grid: &[f64], overlays: &[OverlayPoint]) -> Result<Vec<Figure3Row>> {
    ensure(!v0_grid.is_empty() && !eta_grid.is_empty(), || "empty grid".into())?;
    let unit = |x: &f64| (0.0..=1.0).contains(x);
    ensure(v0_grid.iter().all(unit) && eta_grid.iter().all(unit), || {
        "grid values must lie in [0, 1]".into()
    })?;
    let grid = v0_grid.iter().flat_map(|&v0| {
        eta_grid.iter().map(move |&eta| Figure3Row {
            kind: Figure3Kind::Grid,
            label: String::new(),
            v0,
            eta,
            s: bell_parameter(v0, eta),
        })
    });
    let measured = overlays.iter().map(|o| Figure3Row {
        kind: Figure3Kind::Measured,
        label: o.label.clone(),
        v0: o.v0,
        eta: o.eta,
        s: o.s,
    });
    Ok(grid.chain(measured).collect())
}
