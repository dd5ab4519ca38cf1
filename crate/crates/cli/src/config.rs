//! Simulation config files (TOML).
//!
//! ```toml
//! seed = 42
//! mode = "full"                 # or "paper"
//! duration_per_setting_s = 600
//! trials_per_setting = 1
//! pairs = [[21, 27]]            # omit for every symmetric pair
//!
//! [source]
//! p0 = 6.0e7
//! baseline_v0 = 1.0
//!
//! [detector]                    # any field omitted keeps the gated InGaAs default
//! dark_count_rate_hz = 500
//!
//! [link]
//! insertion_loss_db = 15.2
//!
//! [polarization]
//! eta = 1.0                     # or "pmd"
//!
//! [device]
//! path = "../devices/awg"       # relative to this file
//! ```

use std::fs;
use std::path::{Path, PathBuf};

use qwdm_core::counting::{CountingMode, DetectorParams, SourceParams};
use qwdm_core::montecarlo::{standard_plan, ArmConfig, EtaSource, ExperimentConfig, DEFAULT_FIBER_LOSS_DB_PER_KM};
use qwdm_core::spectral::itu_channel_frequency;
use serde::{Deserialize, Serialize};

use crate::device::{ingest_device, resolve, synthetic_profile, symmetric_pairs, DeviceProfile, SyntheticSpec, Technology};
use crate::error::{config_error, io_error, CliResult};
#[cfg(test)]
use crate::error::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulationConfig {
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_mode")]
    pub mode: CountingMode,
    pub duration_per_setting_s: f64,
    #[serde(default = "default_trials")]
    pub trials_per_setting: u32,
    pub pairs: Option<Vec<(u32, u32)>>,
    pub source: SourceSection,
    #[serde(default)]
    pub detector: DetectorSection,
    #[serde(default)]
    pub link: LinkSection,
    #[serde(default)]
    pub polarization: PolarizationSection,
    pub device: DeviceSection,
}

fn default_mode() -> CountingMode {
    CountingMode::Full
}
fn default_trials() -> u32 {
    1
}
fn default_v0() -> f64 {
    1.0
}
fn default_db_per_km() -> f64 {
    DEFAULT_FIBER_LOSS_DB_PER_KM
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SourceSection {
    pub p0: f64,
    #[serde(default = "default_v0")]
    pub baseline_v0: f64,
    /// Overrides the device's pump half-channel.
    pub pump_half_channel: Option<u32>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DetectorSection {
    pub quantum_efficiency: Option<f64>,
    pub trigger_rate_hz: Option<f64>,
    pub gate_width_s: Option<f64>,
    pub dead_time_s: Option<f64>,
    pub dark_count_rate_hz: Option<f64>,
    pub coincidence_window_s: Option<f64>,
}

impl DetectorSection {
    pub fn params(&self) -> DetectorParams {
        let mut d = DetectorParams::gated_ingaas();
        let set = |slot: &mut f64, v: Option<f64>| {
            if let Some(v) = v {
                *slot = v;
            }
        };
        set(&mut d.quantum_efficiency, self.quantum_efficiency);
        set(&mut d.trigger_rate_hz, self.trigger_rate_hz);
        set(&mut d.gate_width_s, self.gate_width_s);
        set(&mut d.dead_time_s, self.dead_time_s);
        set(&mut d.dark_count_rate_hz, self.dark_count_rate_hz);
        set(&mut d.coincidence_window_s, self.coincidence_window_s);
        d
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LinkSection {
    #[serde(default)]
    pub insertion_loss_db: f64,
    #[serde(default)]
    pub fiber_length_km: f64,
    #[serde(default = "default_db_per_km")]
    pub fiber_loss_db_per_km: f64,
}

impl Default for LinkSection {
    fn default() -> Self {
        Self {
            insertion_loss_db: 0.0,
            fiber_length_km: 0.0,
            fiber_loss_db_per_km: DEFAULT_FIBER_LOSS_DB_PER_KM,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum EtaSetting {
    Value(f64),
    Keyword(EtaKeyword),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EtaKeyword {
    Pmd,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PolarizationSection {
    pub eta: EtaSetting,
}

impl Default for PolarizationSection {
    fn default() -> Self {
        Self {
            eta: EtaSetting::Value(1.0),
        }
    }
}

impl PolarizationSection {
    pub fn source(&self) -> EtaSource {
        match self.eta {
            EtaSetting::Value(eta) => EtaSource::Explicit { eta },
            EtaSetting::Keyword(EtaKeyword::Pmd) => EtaSource::ChannelPmd,
        }
    }
}

/// Either a device directory or an inline synthetic device.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DeviceSection {
    pub path: Option<PathBuf>,
    pub name: Option<String>,
    pub technology: Option<Technology>,
    pub pump_half_channel: Option<u32>,
    pub channels: Option<Vec<u32>>,
    pub synthetic: Option<SyntheticSpec>,
}

/// A parsed config together with the text and location it came from.
#[derive(Debug, Clone)]
pub struct LoadedConfig {
    pub path: PathBuf,
    pub text: String,
    pub config: SimulationConfig,
}

pub fn parse_config(path: &Path, text: &str) -> CliResult<SimulationConfig> {
    let config: SimulationConfig =
        toml::from_str(text).map_err(|e| config_error(path, e.to_string().trim_end().to_string()))?;
    config.validate(path)?;
    Ok(config)
}

pub fn load_config(path: &Path) -> CliResult<LoadedConfig> {
    let text = fs::read_to_string(path).map_err(io_error(path))?;
    let config = parse_config(path, &text)?;
    Ok(LoadedConfig {
        path: path.to_path_buf(),
        text,
        config,
    })
}

impl SimulationConfig {
    fn validate(&self, path: &Path) -> CliResult<()> {
        let fail = |m: &str| Err(config_error(path, m));
        if matches!(&self.pairs, Some(p) if p.is_empty()) {
            return fail("channel pair list is empty");
        }
        if !(self.duration_per_setting_s > 0.0 && self.duration_per_setting_s.is_finite()) {
            return fail("duration_per_setting_s must be positive");
        }
        if self.trials_per_setting == 0 {
            return fail("trials_per_setting must be at least 1");
        }
        let d = &self.device;
        match (&d.path, &d.synthetic) {
            (Some(_), Some(_)) => return fail("[device] takes either path or synthetic, not both"),
            (None, None) => return fail("[device] needs a path or a synthetic section"),
            (Some(_), None) if d.name.is_some() || d.technology.is_some() || d.channels.is_some() => {
                return fail("[device] with a path takes its metadata from device.cfg")
            }
            (None, Some(_)) if d.channels.as_ref().is_none_or(|c| c.is_empty()) => {
                return fail("synthetic [device] needs a non-empty channels list")
            }
            _ => {}
        }
        Ok(())
    }
}

impl LoadedConfig {
    fn base_dir(&self) -> &Path {
        self.path.parent().unwrap_or(Path::new("."))
    }

    /// Device directory named by the config, resolved against its location.
    pub fn device_dir(&self) -> Option<PathBuf> {
        self.config.device.path.as_ref().map(|p| resolve(self.base_dir(), p))
    }

    /// Loads the device, from `override_dir` when given.
    pub fn device(&self, override_dir: Option<&Path>) -> CliResult<DeviceProfile> {
        if let Some(dir) = override_dir {
            return ingest_device(dir);
        }
        let d = &self.config.device;
        match (self.device_dir(), &d.synthetic) {
            (Some(dir), _) => ingest_device(&dir),
            (None, Some(spec)) => synthetic_profile(
                d.name.as_deref().unwrap_or("synthetic"),
                d.technology.unwrap_or(Technology::Custom),
                d.pump_half_channel.unwrap_or(24),
                d.channels.as_deref().unwrap_or_default(),
                spec,
                &self.path,
            ),
            (None, None) => Err(config_error(&self.path, "no device")),
        }
    }

    pub fn pump_half_channel(&self, device: &DeviceProfile) -> u32 {
        self.config.source.pump_half_channel.unwrap_or(device.pump_half_channel)
    }

    /// Requested pairs, or every symmetric pair of the device.
    pub fn pairs(&self, device: &DeviceProfile, requested: Option<&[(u32, u32)]>) -> CliResult<Vec<(u32, u32)>> {
        let pairs = match requested.or(self.config.pairs.as_deref()) {
            Some(p) => p.to_vec(),
            None => symmetric_pairs(device, 2.0 * itu_channel_frequency(self.pump_half_channel(device))),
        };
        if pairs.is_empty() {
            return Err(config_error(&self.path, "no channel pairs to simulate"));
        }
        Ok(pairs)
    }

    pub fn experiment(
        &self,
        device: &DeviceProfile,
        pair: (u32, u32),
        seed: u64,
        mode: CountingMode,
    ) -> CliResult<ExperimentConfig> {
        let c = &self.config;
        let channel = |n: u32| {
            device.channel(n).cloned().ok_or_else(|| {
                config_error(&self.path, format!("channel {n} is not in device `{}`", device.name))
            })
        };
        let detector = c.detector.params();
        let arm = |n| -> CliResult<ArmConfig> {
            let mut a = ArmConfig::new(channel(n)?, detector);
            a.insertion_loss_db = c.link.insertion_loss_db;
            a.fiber_length_km = c.link.fiber_length_km;
            a.fiber_loss_db_per_km = c.link.fiber_loss_db_per_km;
            Ok(a)
        };
        let pump = 2.0 * itu_channel_frequency(self.pump_half_channel(device));
        let experiment = ExperimentConfig {
            source: SourceParams::new(c.source.p0, pump, c.source.baseline_v0)
                .map_err(|e| config_error(&self.path, e.to_string()))?,
            signal: arm(pair.0)?,
            idler: arm(pair.1)?,
            eta: c.polarization.source(),
            plan: standard_plan(c.duration_per_setting_s),
            trials_per_setting: c.trials_per_setting,
            mode,
            seed,
        };
        experiment
            .validate()
            .map_err(|e| config_error(&self.path, e.to_string()))?;
        Ok(experiment)
    }
}
