//! Event-level simulation of the distribution experiment: pair emission,
//! routing loss, fiber attenuation, polarization analysis, gated detection
//! with dark counts and dead time, and coincidence windowing.

mod analysis;
mod calibration;
mod engine;
mod sweeps;

use serde::{Deserialize, Serialize};

use crate::counting::{CountingMode, DetectorParams, PairView, RateBudget, SourceParams};
use crate::error::{ensure, Result};
use crate::quantum::{MeasurementSetting, PolarizationModel};
use crate::spectral::{pair_overlap, pmd_overlap, temporal_profile, ChannelSpectrum, PairOverlap, TimeGrid};

pub use analysis::{BellResult, BellRun};
pub use calibration::{calibrate, predict, Calibration, Prediction};
pub use engine::{CountRecord, SettingLabel};
pub use sweeps::{sweep_figure2, sweep_figure3, DevicePair, Figure2Row, Figure3Kind, Figure3Row, OverlayPoint};

pub const DEFAULT_FIBER_LOSS_DB_PER_KM: f64 = 0.2;

/// One arm from the demultiplexer output to its detector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArmConfig {
    pub channel: ChannelSpectrum,
    /// Lumped routing and analyzer loss beyond the channel's peak transmission.
    pub insertion_loss_db: f64,
    pub fiber_length_km: f64,
    pub fiber_loss_db_per_km: f64,
    pub detector: DetectorParams,
}

impl ArmConfig {
    pub fn new(channel: ChannelSpectrum, detector: DetectorParams) -> Self {
        Self {
            channel,
            insertion_loss_db: 0.0,
            fiber_length_km: 0.0,
            fiber_loss_db_per_km: DEFAULT_FIBER_LOSS_DB_PER_KM,
            detector,
        }
    }

    pub fn extra_loss_db(&self) -> f64 {
        self.insertion_loss_db + self.fiber_length_km * self.fiber_loss_db_per_km
    }

    /// Peak channel transmission times every extra loss.
    pub fn end_to_end_transmission(&self) -> f64 {
        self.channel.peak_transmission() * 10f64.powf(-self.extra_loss_db() / 10.0)
    }

    fn validate(&self) -> Result<()> {
        ensure(
            self.insertion_loss_db >= 0.0 && self.fiber_length_km >= 0.0 && self.fiber_loss_db_per_km >= 0.0,
            || "attenuation must be non-negative".into(),
        )?;
        self.detector.validate()
    }
}

/// Where the PMD overlap η comes from.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind")]
pub enum EtaSource {
    Explicit { eta: f64 },
    /// Overlap of the two channels' Fourier-limited wavepackets shifted by
    /// their differential PMD delay.
    ChannelPmd,
}

/// One analyzer setting, by physical polarizer angle, and its acquisition time.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PlannedSetting {
    pub alice_deg: f64,
    pub bob_deg: f64,
    pub duration_s: f64,
}

impl PlannedSetting {
    pub fn setting(&self) -> MeasurementSetting {
        MeasurementSetting::from_polarizer_degrees(self.alice_deg, self.bob_deg)
    }
}

const FRINGE_ANGLES_DEG: [f64; 4] = [0.0, 45.0, 90.0, 135.0];
const CHSH_BOB_ANGLES_DEG: [f64; 4] = [22.5, 67.5, 112.5, 157.5];

/// The 4×4 fringe grid followed by the 4×4 CHSH grid, every setting acquired
/// for `duration_s`.
pub fn standard_plan(duration_s: f64) -> Vec<PlannedSetting> {
    let grid = |bobs: [f64; 4]| {
        FRINGE_ANGLES_DEG.into_iter().flat_map(move |a| {
            bobs.into_iter().map(move |b| PlannedSetting {
                alice_deg: a,
                bob_deg: b,
                duration_s,
            })
        })
    };
    grid(FRINGE_ANGLES_DEG).chain(grid(CHSH_BOB_ANGLES_DEG)).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub source: SourceParams,
    pub signal: ArmConfig,
    pub idler: ArmConfig,
    pub eta: EtaSource,
    pub plan: Vec<PlannedSetting>,
    /// Independent trials each setting's acquisition is split into.
    pub trials_per_setting: u32,
    pub mode: CountingMode,
    pub seed: u64,
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        self.source.validate()?;
        self.signal.validate()?;
        self.idler.validate()?;
        ensure(!self.plan.is_empty(), || "measurement plan is empty".into())?;
        ensure(self.plan.iter().all(|p| p.duration_s > 0.0 && p.duration_s.is_finite()), || {
            "acquisition durations must be positive".into()
        })?;
        ensure(self.trials_per_setting >= 1, || "at least one trial per setting".into())?;
        if let EtaSource::Explicit { eta } = self.eta {
            ensure((0.0..=1.0).contains(&eta), || format!("η = {eta} outside [0, 1]"))?;
        }
        Ok(())
    }

    pub fn overlap(&self) -> Result<PairOverlap> {
        pair_overlap(&self.signal.channel, &self.idler.channel, self.source.pump_frequency_thz)
    }

    pub fn pair_view(&self) -> Result<PairView> {
        Ok(PairView::new(
            &self.overlap()?,
            self.signal.end_to_end_transmission(),
            self.idler.end_to_end_transmission(),
        ))
    }

    pub fn rate_budget(&self) -> Result<RateBudget> {
        crate::counting::rate_budget(
            &self.source,
            &self.pair_view()?,
            &self.signal.detector,
            &self.idler.detector,
            self.mode,
        )
    }

    /// Polarization state parameters of the emitted pairs, before accidentals.
    pub fn polarization_model(&self) -> Result<PolarizationModel> {
        match self.eta {
            EtaSource::Explicit { eta } => PolarizationModel::new(self.source.baseline_v0, eta),
            EtaSource::ChannelPmd => {
                let s = temporal_profile(&self.signal.channel, TimeGrid::for_channel(&self.signal.channel))?;
                let i = temporal_profile(&self.idler.channel, TimeGrid::for_channel(&self.idler.channel))?;
                let tau = (self.signal.channel.pmd_delay_ps() - self.idler.channel.pmd_delay_ps()).abs();
                let mut model = PolarizationModel::new(self.source.baseline_v0, pmd_overlap(&s, &i, tau))?;
                model.tau_pmd_ps = Some(tau);
                Ok(model)
            }
        }
    }

    /// Same experiment with `length_km` of fiber at `db_per_km` in each arm.
    pub fn with_fiber(&self, length_km: f64, db_per_km: f64) -> Self {
        let mut c = self.clone();
        for arm in [&mut c.signal, &mut c.idler] {
            arm.fiber_length_km = length_km;
            arm.fiber_loss_db_per_km = db_per_km;
        }
        c
    }
}

/// Runs the full plan and evaluates visibilities, the Bell parameter,
/// brightness and η̂.
pub fn run_bell_experiment(config: &ExperimentConfig) -> Result<BellRun> {
    run_with(config, true)
}

/// As [`run_bell_experiment`], evaluating settings one after another.
pub fn run_bell_experiment_serial(config: &ExperimentConfig) -> Result<BellRun> {
    run_with(config, false)
}

fn run_with(config: &ExperimentConfig, parallel: bool) -> Result<BellRun> {
    config.validate()?;
    let records = engine::simulate_plan(config, parallel)?;
    analysis::evaluate(config, records)
}

/// Repeats the base experiment with `length_km` of fiber per arm for each
/// requested length.
pub fn run_attenuation_study(config: &ExperimentConfig, lengths_km: &[f64], db_per_km: f64) -> Result<Vec<BellRun>> {
    ensure(db_per_km >= 0.0, || "fiber loss must be non-negative".into())?;
    lengths_km
        .iter()
        .map(|&l| {
            ensure(l >= 0.0, || format!("fiber length {l} km is negative"))?;
            run_bell_experiment(&config.with_fiber(l, db_per_km))
        })
        .collect()
}

/// Zero-loss, flat-top 100 GHz DTF-like pair (channels 21/27, pump at twice
/// channel 24) with gated InGaAs detectors.
pub fn dtf_like_config(duration_per_setting_s: f64, seed: u64) -> Result<ExperimentConfig> {
    use crate::spectral::{itu_channel_frequency, make_channel, ShapeKind, DEFAULT_FLAT_TOP_ORDER};
    let shape = ShapeKind::FlatTop {
        order: DEFAULT_FLAT_TOP_ORDER,
    };
    let ch = |n| make_channel(shape, itu_channel_frequency(n), 100.0, 0.9, 2.0);
    let detector = DetectorParams::gated_ingaas();
    Ok(ExperimentConfig {
        source: SourceParams::new(1e5, 2.0 * itu_channel_frequency(24), 1.0)?,
        signal: ArmConfig::new(ch(21)?, detector),
        idler: ArmConfig::new(ch(27)?, detector),
        eta: EtaSource::Explicit { eta: 1.0 },
        plan: standard_plan(duration_per_setting_s),
        trials_per_setting: 1,
        mode: CountingMode::Full,
        seed,
    })
}
