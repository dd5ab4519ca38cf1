//! Run manifest: everything needed to regenerate a simulation's outputs.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use qwdm_core::counting::CountingMode;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::device::hex;
use crate::error::{config_error, io_error, CliResult};

pub const MANIFEST_FILE: &str = "manifest.toml";
pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Manifest {
    pub tool_version: String,
    pub config_path: PathBuf,
    pub config_sha256: String,
    /// Absent for devices defined inline in the config.
    pub device_path: Option<PathBuf>,
    pub device_fingerprint: String,
    pub seed: u64,
    pub mode: CountingMode,
    pub pairs: Vec<(u32, u32)>,
    pub config_text: String,
    /// SHA-256 of each written file, by file name.
    pub outputs: BTreeMap<String, String>,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex(&Sha256::digest(bytes))
}

pub fn file_sha256(path: &Path) -> CliResult<String> {
    Ok(sha256_hex(&fs::read(path).map_err(io_error(path))?))
}

impl Manifest {
    pub fn write(&self, path: &Path) -> CliResult<()> {
        let text = toml::to_string(self).map_err(|e| config_error(path, e.to_string()))?;
        fs::write(path, text).map_err(io_error(path))
    }

    pub fn read(path: &Path) -> CliResult<Self> {
        let text = fs::read_to_string(path).map_err(io_error(path))?;
        let m: Self = toml::from_str(&text).map_err(|e| config_error(path, e.to_string().trim_end().to_string()))?;
        if sha256_hex(m.config_text.as_bytes()) != m.config_sha256 {
            return Err(config_error(path, "embedded config does not match config_sha256"));
        }
        Ok(m)
    }
}
