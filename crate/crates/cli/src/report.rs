//! CSV row types for every file the CLI writes, each readable back.

use std::fs;
use std::path::Path;

use qwdm_core::montecarlo::{BellRun, CountRecord, Figure3Kind, Figure3Row};
use qwdm_core::quantum::noisy_pair_state;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::device::format_pair;
use crate::error::{csv_error, io_error, CliResult};

/// Columns of the per-pair results table.
pub const REPORT_HEADER: [&str; 12] = [
    "device",
    "channel_pair",
    "V0",
    "V0_sigma",
    "V45",
    "V45_sigma",
    "S",
    "S_sigma",
    "brightness_per_min",
    "zeta_Q",
    "eta",
    "eta_sigma",
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub device: String,
    pub channel_pair: String,
    #[serde(rename = "V0")]
    pub v0: f64,
    #[serde(rename = "V0_sigma")]
    pub v0_sigma: f64,
    #[serde(rename = "V45")]
    pub v45: f64,
    #[serde(rename = "V45_sigma")]
    pub v45_sigma: f64,
    #[serde(rename = "S")]
    pub s: f64,
    #[serde(rename = "S_sigma")]
    pub s_sigma: f64,
    pub brightness_per_min: f64,
    #[serde(rename = "zeta_Q")]
    pub zeta_q: f64,
    pub eta: Option<f64>,
    pub eta_sigma: Option<f64>,
}

impl ReportRow {
    pub fn from_run(device: &str, pair: (u32, u32), run: &BellRun) -> Self {
        let r = &run.result;
        Self {
            device: device.to_string(),
            channel_pair: format_pair(pair),
            v0: r.v0.value,
            v0_sigma: r.v0.sigma,
            v45: r.v45.value,
            v45_sigma: r.v45.sigma,
            s: r.s.value,
            s_sigma: r.s.sigma,
            brightness_per_min: r.brightness_per_min,
            zeta_q: run.overlap.zeta_q,
            eta: r.eta.map(|m| m.value),
            eta_sigma: r.eta.map(|m| m.sigma),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecordRow {
    pub device: String,
    pub channel_pair: String,
    pub alice_deg: f64,
    pub bob_deg: f64,
    pub duration_s: f64,
    pub singles_signal: u64,
    pub singles_idler: u64,
    pub raw_coincidences: u64,
    pub accidental_estimate: f64,
    pub true_coincidences: u64,
    pub accidental_coincidences: u64,
}

impl RecordRow {
    pub fn from_record(device: &str, pair: (u32, u32), r: &CountRecord) -> Self {
        Self {
            device: device.to_string(),
            channel_pair: format_pair(pair),
            alice_deg: r.setting.alice_deg,
            bob_deg: r.setting.bob_deg,
            duration_s: r.duration_s,
            singles_signal: r.singles_signal,
            singles_idler: r.singles_idler,
            raw_coincidences: r.raw_coincidences,
            accidental_estimate: r.accidental_estimate,
            true_coincidences: r.true_coincidences,
            accidental_coincidences: r.accidental_coincidences,
        }
    }
}

/// One density-matrix entry of the emitted pair state, row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StateRow {
    pub device: String,
    pub channel_pair: String,
    pub index: usize,
    pub re: f64,
    pub im: f64,
}

pub fn state_rows(device: &str, pair: (u32, u32), run: &BellRun) -> CliResult<Vec<StateRow>> {
    let rho = noisy_pair_state(&run.model)?;
    Ok(rho
        .to_row_major()
        .iter()
        .enumerate()
        .map(|(index, z)| StateRow {
            device: device.to_string(),
            channel_pair: format_pair(pair),
            index,
            re: z.re,
            im: z.im,
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ZetaRow {
    pub device: String,
    pub channel_pair: String,
    pub pump_thz: f64,
    #[serde(rename = "I1_signal")]
    pub i1_signal: f64,
    #[serde(rename = "I1_idler")]
    pub i1_idler: f64,
    #[serde(rename = "I2")]
    pub i2: f64,
    #[serde(rename = "zeta_Q")]
    pub zeta_q: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Figure2CsvRow {
    pub label: String,
    #[serde(rename = "zeta_Q")]
    pub zeta_q: f64,
    #[serde(rename = "V0")]
    pub v0: f64,
    #[serde(rename = "V0_sigma")]
    pub v0_sigma: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Figure3CsvRow {
    pub kind: Figure3Kind,
    pub label: String,
    #[serde(rename = "V0")]
    pub v0: f64,
    pub eta: f64,
    #[serde(rename = "S")]
    pub s: f64,
}

impl From<&Figure3Row> for Figure3CsvRow {
    fn from(r: &Figure3Row) -> Self {
        Self {
            kind: r.kind,
            label: r.label.clone(),
            v0: r.v0,
            eta: r.eta,
            s: r.s,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttenuationRow {
    pub channel_pair: String,
    pub fiber_length_km: f64,
    pub loss_db_per_arm: f64,
    #[serde(rename = "V0")]
    pub v0: f64,
    #[serde(rename = "V0_sigma")]
    pub v0_sigma: f64,
    #[serde(rename = "V45")]
    pub v45: f64,
    #[serde(rename = "V45_sigma")]
    pub v45_sigma: f64,
    #[serde(rename = "S")]
    pub s: f64,
    #[serde(rename = "S_sigma")]
    pub s_sigma: f64,
    pub brightness_per_min: f64,
    pub eta: Option<f64>,
    pub eta_sigma: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SlopeRow {
    pub device: String,
    pub channel_pair: String,
    #[serde(rename = "zeta_Q")]
    pub zeta_q: f64,
    pub slope: f64,
    pub inverse_slope: f64,
}

pub fn write_rows<T: Serialize>(path: &Path, rows: &[T]) -> CliResult<()> {
    let mut w = csv::Writer::from_path(path).map_err(csv_error(path))?;
    for row in rows {
        w.serialize(row).map_err(csv_error(path))?;
    }
    w.flush().map_err(io_error(path))
}

/// Always writes the header, even for an empty report.
pub fn write_report(path: &Path, rows: &[ReportRow]) -> CliResult<()> {
    if !rows.is_empty() {
        return write_rows(path, rows);
    }
    let mut w = csv::Writer::from_path(path).map_err(csv_error(path))?;
    w.write_record(REPORT_HEADER).map_err(csv_error(path))?;
    w.flush().map_err(io_error(path))
}

pub fn read_rows<T: DeserializeOwned>(path: &Path) -> CliResult<Vec<T>> {
    let bytes = fs::read(path).map_err(io_error(path))?;
    let mut r = csv::Reader::from_reader(bytes.as_slice());
    r.deserialize().collect::<Result<_, _>>().map_err(csv_error(path))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn roundtrip<T: Serialize + DeserializeOwned + PartialEq + std::fmt::Debug>(rows: Vec<T>) -> String {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("x.csv");
        write_rows(&path, &rows).unwrap();
        assert_eq!(read_rows::<T>(&path).unwrap(), rows);
        fs::read_to_string(&path).unwrap()
    }

    fn report_row(eta: Option<f64>) -> ReportRow {
        ReportRow {
            device: "DTF".into(),
            channel_pair: "(21,27)".into(),
            v0: 0.91,
            v0_sigma: 0.013,
            v45: 0.8712345678901234,
            v45_sigma: 1e-3,
            s: 2.57,
            s_sigma: 0.05,
            brightness_per_min: 540.25,
            zeta_q: 0.9,
            eta,
            eta_sigma: eta.map(|_| 0.04),
        }
    }

    #[test]
    fn report_header_and_roundtrip() {
        let text = roundtrip(vec![report_row(Some(0.95)), report_row(None)]);
        let mut lines = text.lines();
        assert_eq!(lines.next().unwrap(), REPORT_HEADER.join(","));
        assert!(lines.nth(1).unwrap().ends_with(",,"));
    }

    #[test]
    fn empty_report_has_header() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("r.csv");
        write_report(&path, &[]).unwrap();
        assert_eq!(fs::read_to_string(&path).unwrap().trim(), REPORT_HEADER.join(","));
        assert!(read_rows::<ReportRow>(&path).unwrap().is_empty());
    }

    #[test]
    fn other_rows_roundtrip() {
        roundtrip(vec![Figure3CsvRow {
            kind: Figure3Kind::Measured,
            label: "a,b".into(),
            v0: 0.5,
            eta: 1.0,
            s: 2.1,
        }]);
        roundtrip(vec![ZetaRow {
            device: "x".into(),
            channel_pair: "(1,2)".into(),
            pump_thz: 384.8,
            i1_signal: 1.0 / 3.0,
            i1_idler: 2.0,
            i2: 0.1,
            zeta_q: 0.7,
        }]);
        roundtrip(vec![SlopeRow {
            device: "x".into(),
            channel_pair: "(1,2)".into(),
            zeta_q: 0.5,
            slope: 1.25e-7,
            inverse_slope: 8e6,
        }]);
    }
}
