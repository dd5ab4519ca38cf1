//! Device profiles: a `device.cfg` plus one `chNN.csv` transmission curve
//! per ITU channel, or a synthetic analytic passband.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use qwdm_core::spectral::{
    itu_channel_frequency, make_channel, parse_spectrum_csv, ChannelSpectrum, ShapeKind, SpectrumCsvError,
    DEFAULT_FLAT_TOP_ORDER,
};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{config_error, io_error, CliError, CliResult};

pub const DEVICE_FILE: &str = "device.cfg";
/// Tolerance on `ν_i + ν_j = ν_p` when pairing channels.
const PAIRING_TOLERANCE_GHZ: f64 = 1.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Technology {
    #[serde(rename = "DTF")]
    Dtf,
    #[serde(rename = "AWG")]
    Awg,
    #[serde(rename = "DGG")]
    Dgg,
    #[serde(rename = "DGFT")]
    Dgft,
    #[serde(rename = "custom")]
    Custom,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SyntheticShape {
    Rectangular,
    Gaussian,
    FlatTop,
}

/// Analytic passband applied to every listed channel.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SyntheticSpec {
    pub shape: SyntheticShape,
    #[serde(default = "default_order")]
    pub order: u32,
    #[serde(default = "default_width")]
    pub width_ghz: f64,
    #[serde(default = "default_peak")]
    pub peak_transmission: f64,
    /// Band edges at `center ± band_margin · width / 2`.
    pub band_margin: Option<f64>,
}

fn default_order() -> u32 {
    DEFAULT_FLAT_TOP_ORDER
}
fn default_width() -> f64 {
    100.0
}
fn default_peak() -> f64 {
    1.0
}
fn default_pump_half_channel() -> u32 {
    24
}

impl SyntheticSpec {
    pub fn kind(&self) -> ShapeKind {
        match self.shape {
            SyntheticShape::Rectangular => ShapeKind::Rectangular,
            SyntheticShape::Gaussian => ShapeKind::Gaussian,
            SyntheticShape::FlatTop => ShapeKind::FlatTop { order: self.order },
        }
    }

    fn margin(&self) -> f64 {
        self.band_margin.unwrap_or(match self.shape {
            SyntheticShape::Rectangular => 1.0,
            // ±5σ
            SyntheticShape::Gaussian => 10.0 / 2.354_820_045_030_949,
            SyntheticShape::FlatTop => 2.0,
        })
    }

    pub fn channel(&self, number: u32) -> qwdm_core::Result<ChannelSpectrum> {
        make_channel(
            self.kind(),
            itu_channel_frequency(number),
            self.width_ghz,
            self.peak_transmission,
            self.margin(),
        )
    }
}

/// Contents of `device.cfg`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DeviceFile {
    pub name: String,
    pub technology: Technology,
    /// ITU channel at half the pump frequency.
    #[serde(default = "default_pump_half_channel")]
    pub pump_half_channel: u32,
    pub channels: Vec<u32>,
    /// Differential PMD per channel, ps, keyed by channel number.
    #[serde(default)]
    pub pmd_ps: BTreeMap<String, f64>,
    pub synthetic: Option<SyntheticSpec>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DeviceProfile {
    pub name: String,
    pub technology: Technology,
    pub pump_half_channel: u32,
    pub channels: BTreeMap<u32, ChannelSpectrum>,
    /// SHA-256 over `device.cfg` and every channel file, in channel order.
    pub fingerprint: String,
}

impl DeviceProfile {
    pub fn pump_frequency_thz(&self) -> f64 {
        2.0 * itu_channel_frequency(self.pump_half_channel)
    }

    pub fn channel(&self, n: u32) -> Option<&ChannelSpectrum> {
        self.channels.get(&n)
    }
}

pub fn channel_file_name(n: u32) -> String {
    format!("ch{n:02}.csv")
}

fn parse_device_file(path: &Path, text: &str) -> CliResult<DeviceFile> {
    toml::from_str(text).map_err(|e| CliError::Ingest {
        file: path.to_path_buf(),
        message: e.to_string().trim_end().to_string(),
    })
}

/// Builds a profile from a parsed `device.cfg`, reading channel CSVs from
/// `dir` when the device is not synthetic.
pub fn build_profile(file: DeviceFile, cfg_path: &Path, cfg_text: &str, dir: &Path) -> CliResult<DeviceProfile> {
    let ingest = |file: &Path, message: String| CliError::Ingest {
        file: file.to_path_buf(),
        message,
    };
    if file.channels.is_empty() {
        return Err(ingest(cfg_path, "lists no channels".into()));
    }
    let mut seen = std::collections::BTreeSet::new();
    if let Some(dup) = file.channels.iter().find(|n| !seen.insert(**n)) {
        return Err(ingest(cfg_path, format!("lists channel {dup} twice")));
    }

    let mut pmd = BTreeMap::new();
    for (key, value) in &file.pmd_ps {
        let n: u32 = key
            .parse()
            .map_err(|_| ingest(cfg_path, format!("pmd_ps key `{key}` is not a channel number")))?;
        if !seen.contains(&n) {
            return Err(ingest(cfg_path, format!("pmd_ps names unlisted channel {n}")));
        }
        if !(value.is_finite() && *value >= 0.0) {
            return Err(ingest(cfg_path, format!("pmd_ps for channel {n} must be non-negative")));
        }
        pmd.insert(n, *value);
    }

    let mut hasher = Sha256::new();
    hasher.update(cfg_text.as_bytes());
    let mut channels = BTreeMap::new();
    for &n in &file.channels {
        let channel = match &file.synthetic {
            Some(spec) => spec.channel(n).map_err(|e| ingest(cfg_path, e.to_string()))?,
            None => {
                let path = dir.join(channel_file_name(n));
                let bytes = fs::read(&path).map_err(|e| match e.kind() {
                    std::io::ErrorKind::NotFound => ingest(&path, format!("missing for listed channel {n}")),
                    _ => CliError::Io {
                        path: path.clone(),
                        source: e,
                    },
                })?;
                hasher.update(&bytes);
                let curve = parse_spectrum_csv(bytes.as_slice()).map_err(|e| match e {
                    SpectrumCsvError::Line { line, message } => ingest(&path, format!("line {line}: {message}")),
                    SpectrumCsvError::Format(m) => ingest(&path, m),
                })?;
                ChannelSpectrum::tabulated(itu_channel_frequency(n), curve).map_err(|e| ingest(&path, e.to_string()))?
            }
        };
        let channel = channel.with_pmd_delay(pmd.get(&n).copied().unwrap_or(0.0));
        channels.insert(n, channel);
    }
    let fingerprint = hex(&hasher.finalize());
    Ok(DeviceProfile {
        name: file.name,
        technology: file.technology,
        pump_half_channel: file.pump_half_channel,
        channels,
        fingerprint,
    })
}

/// Loads and validates a device directory.
pub fn ingest_device(dir: &Path) -> CliResult<DeviceProfile> {
    let cfg_path = dir.join(DEVICE_FILE);
    let text = fs::read_to_string(&cfg_path).map_err(io_error(&cfg_path))?;
    let file = parse_device_file(&cfg_path, &text)?;
    build_profile(file, &cfg_path, &text, dir)
}

/// Channel pairs whose centre frequencies sum to the pump frequency, inner
/// pairs first.
pub fn symmetric_pairs(profile: &DeviceProfile, pump_thz: f64) -> Vec<(u32, u32)> {
    let numbers: Vec<u32> = profile.channels.keys().copied().collect();
    let mut pairs = Vec::new();
    for (k, &a) in numbers.iter().enumerate() {
        for &b in &numbers[k + 1..] {
            let sum = profile.channels[&a].center_thz() + profile.channels[&b].center_thz();
            if ((sum - pump_thz) * 1000.0).abs() < PAIRING_TOLERANCE_GHZ {
                pairs.push((a, b));
            }
        }
    }
    pairs.sort_by_key(|&(a, b)| (b - a, a));
    pairs
}

/// Parses `21-27,22-26` (also `21/27` or `(21,27)` separated by `;`).
pub fn parse_pairs(list: &str) -> CliResult<Vec<(u32, u32)>> {
    let entries: Vec<&str> = if list.contains(';') {
        list.split(';').collect()
    } else {
        list.split(',').collect()
    };
    let bad = |e: &str| CliError::Usage(format!("cannot parse channel pair `{e}` (expected e.g. 21-27)"));
    entries
        .into_iter()
        .map(str::trim)
        .filter(|e| !e.is_empty())
        .map(|e| {
            let inner = e.trim_start_matches('(').trim_end_matches(')');
            let (a, b) = inner
                .split_once(['-', '/', ','])
                .ok_or_else(|| bad(e))?;
            let a: u32 = a.trim().parse().map_err(|_| bad(e))?;
            let b: u32 = b.trim().parse().map_err(|_| bad(e))?;
            Ok((a, b))
        })
        .collect()
}

pub fn format_pair(pair: (u32, u32)) -> String {
    format!("({},{})", pair.0, pair.1)
}

pub(crate) fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

/// Inline synthetic device described inside a simulation config.
pub fn synthetic_profile(
    name: &str,
    technology: Technology,
    pump_half_channel: u32,
    channels: &[u32],
    spec: &SyntheticSpec,
    config_path: &Path,
) -> CliResult<DeviceProfile> {
    let file = DeviceFile {
        name: name.to_string(),
        technology,
        pump_half_channel,
        channels: channels.to_vec(),
        pmd_ps: BTreeMap::new(),
        synthetic: Some(spec.clone()),
    };
    let text = toml::to_string(&file).map_err(|e| config_error(config_path, e.to_string()))?;
    build_profile(file, config_path, &text, Path::new("."))
}

pub fn resolve(base: &Path, p: &Path) -> PathBuf {
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        base.join(p)
    }
}
