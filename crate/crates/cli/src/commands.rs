//! Subcommand implementations. Each returns what it wrote so callers can
//! print or inspect it.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use qwdm_core::counting::{slope_quality, CountingMode, DetectorParams, PairView, SourceParams};
use qwdm_core::montecarlo::{
    run_attenuation_study, run_bell_experiment, run_bell_experiment_serial, sweep_figure2, sweep_figure3, DevicePair,
    OverlayPoint,
};
use qwdm_core::spectral::{itu_channel_frequency, pair_overlap};

use crate::config::{load_config, LoadedConfig};
use crate::device::{format_pair, ingest_device, symmetric_pairs, DeviceProfile};
use crate::error::{config_error, io_error, CliError, CliResult};
use crate::manifest::{file_sha256, sha256_hex, Manifest, MANIFEST_FILE, TOOL_VERSION};
use crate::report::{
    read_rows, state_rows, write_report, write_rows, AttenuationRow, Figure2CsvRow, Figure3CsvRow, RecordRow,
    ReportRow, SlopeRow, ZetaRow,
};

pub const REPORT_FILE: &str = "report.csv";
pub const RECORDS_FILE: &str = "records.csv";
pub const STATES_FILE: &str = "states.csv";
pub const ZETA_FILE: &str = "zeta.csv";

fn ensure_dir(dir: &Path) -> CliResult<()> {
    fs::create_dir_all(dir).map_err(io_error(dir))
}

/// Pump frequency for a device, optionally moved to another half-channel or
/// given directly.
fn pump_frequency(device: &DeviceProfile, half_channel: Option<u32>, pump_thz: Option<f64>) -> f64 {
    match (pump_thz, half_channel) {
        (Some(p), _) => p,
        (None, Some(n)) => 2.0 * itu_channel_frequency(n),
        (None, None) => device.pump_frequency_thz(),
    }
}

#[derive(Debug, Clone)]
pub struct IngestSummary {
    pub profile: DeviceProfile,
    pub pairs: Vec<(u32, u32)>,
}

pub fn ingest_check(dir: &Path) -> CliResult<IngestSummary> {
    let profile = ingest_device(dir)?;
    let pairs = symmetric_pairs(&profile, profile.pump_frequency_thz());
    Ok(IngestSummary { profile, pairs })
}

#[derive(Debug, Clone, Default)]
pub struct CharacterizeOptions {
    pub device: Option<PathBuf>,
    pub config: Option<PathBuf>,
    pub pairs: Option<Vec<(u32, u32)>>,
    pub pump_half_channel: Option<u32>,
    pub pump_thz: Option<f64>,
    pub out: Option<PathBuf>,
}

/// ζ_Q and its integrals for every symmetric pair (or the requested pairs).
pub fn characterize(opts: &CharacterizeOptions) -> CliResult<Vec<ZetaRow>> {
    let (device, config_pump) = match (&opts.device, &opts.config) {
        (Some(dir), _) => (ingest_device(dir)?, None),
        (None, Some(path)) => {
            let l = load_config(path)?;
            let d = l.device(None)?;
            let half = l.pump_half_channel(&d);
            (d, Some(half))
        }
        (None, None) => return Err(CliError::Usage("characterize needs --device or --config".into())),
    };
    let pump = pump_frequency(&device, opts.pump_half_channel.or(config_pump), opts.pump_thz);
    let pairs = match &opts.pairs {
        Some(p) => p.clone(),
        None => symmetric_pairs(&device, pump),
    };
    let origin = opts.device.clone().or_else(|| opts.config.clone()).unwrap_or_default();
    if pairs.is_empty() {
        return Err(config_error(
            &origin,
            format!("device `{}` has no channel pairs symmetric about {pump} THz", device.name),
        ));
    }
    let rows = pairs
        .iter()
        .map(|&(a, b)| {
            let ch = |n| {
                device
                    .channel(n)
                    .ok_or_else(|| config_error(&origin, format!("channel {n} is not in device `{}`", device.name)))
            };
            let o = pair_overlap(ch(a)?, ch(b)?, pump)?;
            Ok(ZetaRow {
                device: device.name.clone(),
                channel_pair: format_pair((a, b)),
                pump_thz: pump,
                i1_signal: o.i1_signal,
                i1_idler: o.i1_idler,
                i2: o.i2,
                zeta_q: o.zeta_q,
            })
        })
        .collect::<CliResult<Vec<_>>>()?;
    if let Some(out) = &opts.out {
        ensure_dir(out)?;
        write_rows(&out.join(ZETA_FILE), &rows)?;
    }
    Ok(rows)
}

#[derive(Debug, Clone, Default)]
pub struct SimulateOptions {
    pub config: Option<PathBuf>,
    pub manifest: Option<PathBuf>,
    pub device: Option<PathBuf>,
    pub seed: Option<u64>,
    pub mode: Option<CountingMode>,
    pub pairs: Option<Vec<(u32, u32)>>,
    pub out: PathBuf,
    pub serial: bool,
}

#[derive(Debug)]
pub struct SimulateOutcome {
    pub rows: Vec<ReportRow>,
    /// Pairs that produced no row, with the reason.
    pub failures: Vec<CliError>,
    pub manifest: Manifest,
}

impl SimulateOutcome {
    pub fn succeeded(&self) -> bool {
        self.failures.is_empty()
    }
}

/// Everything that determines a simulation's outputs.
struct RunPlan {
    loaded: LoadedConfig,
    device: DeviceProfile,
    device_path: Option<PathBuf>,
    seed: u64,
    mode: CountingMode,
    pairs: Vec<(u32, u32)>,
    expected_outputs: Option<BTreeMap<String, String>>,
}

fn canonical(path: &Path) -> CliResult<PathBuf> {
    fs::canonicalize(path).map_err(io_error(path))
}

fn plan_from_config(opts: &SimulateOptions, path: &Path) -> CliResult<RunPlan> {
    let mut loaded = load_config(path)?;
    loaded.path = canonical(path)?;
    let device_path = match &opts.device {
        Some(d) => Some(canonical(d)?),
        None => loaded.device_dir().map(|d| canonical(&d)).transpose()?,
    };
    let device = loaded.device(device_path.as_deref())?;
    let pairs = loaded.pairs(&device, opts.pairs.as_deref())?;
    Ok(RunPlan {
        seed: opts.seed.unwrap_or(loaded.config.seed),
        mode: opts.mode.unwrap_or(loaded.config.mode),
        loaded,
        device,
        device_path,
        pairs,
        expected_outputs: None,
    })
}

fn plan_from_manifest(opts: &SimulateOptions, path: &Path) -> CliResult<RunPlan> {
    if opts.config.is_some() || opts.device.is_some() || opts.seed.is_some() || opts.mode.is_some() || opts.pairs.is_some()
    {
        return Err(CliError::Usage(
            "--manifest fixes config, device, seed, mode and pairs; drop the other flags".into(),
        ));
    }
    let m = Manifest::read(path)?;
    let config = crate::config::parse_config(&m.config_path, &m.config_text)?;
    let loaded = LoadedConfig {
        path: m.config_path.clone(),
        text: m.config_text.clone(),
        config,
    };
    let device = loaded.device(m.device_path.as_deref())?;
    if device.fingerprint != m.device_fingerprint {
        return Err(config_error(path, "device contents changed since the manifest was written"));
    }
    Ok(RunPlan {
        loaded,
        device,
        device_path: m.device_path,
        seed: m.seed,
        mode: m.mode,
        pairs: m.pairs,
        expected_outputs: Some(m.outputs),
    })
}

/// Runs every requested pair and writes report, records, states and manifest
/// into `opts.out`. A failing pair is reported in the outcome without
/// stopping the others.
pub fn simulate(opts: &SimulateOptions) -> CliResult<SimulateOutcome> {
    let plan = match (&opts.manifest, &opts.config) {
        (Some(m), _) => plan_from_manifest(opts, m)?,
        (None, Some(c)) => plan_from_config(opts, c)?,
        (None, None) => return Err(CliError::Usage("simulate needs --config or --manifest".into())),
    };
    ensure_dir(&opts.out)?;

    let name = plan.device.name.clone();
    let (mut rows, mut records, mut states, mut failures) = (vec![], vec![], vec![], vec![]);
    for &pair in &plan.pairs {
        let result = plan
            .loaded
            .experiment(&plan.device, pair, plan.seed, plan.mode)
            .and_then(|e| {
                let run = if opts.serial {
                    run_bell_experiment_serial(&e)
                } else {
                    run_bell_experiment(&e)
                };
                run.map_err(|source| CliError::Simulation { pair, source })
            });
        match result {
            Ok(run) => {
                rows.push(ReportRow::from_run(&name, pair, &run));
                records.extend(run.records.iter().map(|r| RecordRow::from_record(&name, pair, r)));
                states.extend(state_rows(&name, pair, &run)?);
            }
            Err(e) => failures.push(e),
        }
    }

    let mut outputs = BTreeMap::new();
    let report = opts.out.join(REPORT_FILE);
    write_report(&report, &rows)?;
    outputs.insert(REPORT_FILE.to_string(), file_sha256(&report)?);
    for (file, written) in [
        (RECORDS_FILE, write_rows(&opts.out.join(RECORDS_FILE), &records)),
        (STATES_FILE, write_rows(&opts.out.join(STATES_FILE), &states)),
    ] {
        written?;
        outputs.insert(file.to_string(), file_sha256(&opts.out.join(file))?);
    }

    let manifest = Manifest {
        tool_version: TOOL_VERSION.to_string(),
        config_path: plan.loaded.path.clone(),
        config_sha256: sha256_hex(plan.loaded.text.as_bytes()),
        device_path: plan.device_path.clone(),
        device_fingerprint: plan.device.fingerprint.clone(),
        seed: plan.seed,
        mode: plan.mode,
        pairs: plan.pairs.clone(),
        config_text: plan.loaded.text.clone(),
        outputs,
    };
    manifest.write(&opts.out.join(MANIFEST_FILE))?;
    if let Some(expected) = &plan.expected_outputs {
        if expected != &manifest.outputs {
            return Err(config_error(
                opts.manifest.as_deref().unwrap_or(Path::new(MANIFEST_FILE)),
                "rerun produced outputs that differ from the recorded hashes",
            ));
        }
    }
    Ok(SimulateOutcome {
        rows,
        failures,
        manifest,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum SweepKind {
    Figure2,
    Figure3,
    Attenuation,
    Slope,
}

impl SweepKind {
    pub fn file_name(self) -> &'static str {
        match self {
            SweepKind::Figure2 => "sweep_figure2.csv",
            SweepKind::Figure3 => "sweep_figure3.csv",
            SweepKind::Attenuation => "sweep_attenuation.csv",
            SweepKind::Slope => "sweep_slope.csv",
        }
    }
}

impl std::str::FromStr for SweepKind {
    type Err = CliError;
    fn from_str(s: &str) -> CliResult<Self> {
        <Self as clap::ValueEnum>::from_str(s, true)
            .map_err(|_| CliError::Usage(format!("unknown sweep kind `{s}` (figure2, figure3, attenuation, slope)")))
    }
}

#[derive(Debug, Clone)]
pub struct SweepOptions {
    pub kind: SweepKind,
    pub config: Option<PathBuf>,
    pub devices: Vec<PathBuf>,
    pub seed: Option<u64>,
    pub mode: Option<CountingMode>,
    pub pairs: Option<Vec<(u32, u32)>>,
    pub out: PathBuf,
    /// Points per axis for figure3.
    pub grid: usize,
    pub overlays: Vec<PathBuf>,
    pub lengths_km: Vec<f64>,
    pub db_per_km: Option<f64>,
    /// Pump strength for figure2; the config's when absent.
    pub p0: Option<f64>,
    /// Pump strengths for the slope fit.
    pub p0_values: Option<Vec<f64>>,
}

impl SweepOptions {
    pub fn new(kind: SweepKind, out: PathBuf) -> Self {
        Self {
            kind,
            config: None,
            devices: vec![],
            seed: None,
            mode: None,
            pairs: None,
            out,
            grid: 11,
            overlays: vec![],
            lengths_km: vec![0.0, 10.0],
            db_per_km: None,
            p0: None,
            p0_values: None,
        }
    }
}

/// Rows written by a sweep, one variant per kind.
#[derive(Debug, Clone, PartialEq)]
pub enum SweepOutput {
    Figure2(Vec<Figure2CsvRow>),
    Figure3(Vec<Figure3CsvRow>),
    Attenuation(Vec<AttenuationRow>),
    Slope(Vec<SlopeRow>),
}

impl SweepOutput {
    pub fn len(&self) -> usize {
        match self {
            SweepOutput::Figure2(r) => r.len(),
            SweepOutput::Figure3(r) => r.len(),
            SweepOutput::Attenuation(r) => r.len(),
            SweepOutput::Slope(r) => r.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

fn require_config(opts: &SweepOptions) -> CliResult<LoadedConfig> {
    let path = opts
        .config
        .as_deref()
        .ok_or_else(|| CliError::Usage(format!("sweep {:?} needs --config", opts.kind).to_lowercase()))?;
    load_config(path)
}

fn sweep_devices(opts: &SweepOptions, loaded: Option<&LoadedConfig>) -> CliResult<Vec<DeviceProfile>> {
    if !opts.devices.is_empty() {
        return opts.devices.iter().map(|d| ingest_device(d)).collect();
    }
    match loaded {
        Some(l) => Ok(vec![l.device(None)?]),
        None => Err(CliError::Usage("sweep needs --device or --config".into())),
    }
}

fn device_pairs(
    device: &DeviceProfile,
    pump_thz: f64,
    requested: Option<&[(u32, u32)]>,
) -> CliResult<Vec<(u32, u32)>> {
    let pairs = requested.map(<[_]>::to_vec).unwrap_or_else(|| symmetric_pairs(device, pump_thz));
    if pairs.is_empty() {
        return Err(CliError::Usage(format!("device `{}` has no symmetric channel pairs", device.name)));
    }
    Ok(pairs)
}

fn figure2(opts: &SweepOptions) -> CliResult<Vec<Figure2CsvRow>> {
    let loaded = require_config(opts)?;
    let devices = sweep_devices(opts, Some(&loaded))?;
    let seed = opts.seed.unwrap_or(loaded.config.seed);
    let mode = opts.mode.unwrap_or(loaded.config.mode);
    let mut pairs = vec![];
    let mut base = None;
    for d in &devices {
        let pump = 2.0 * itu_channel_frequency(loaded.pump_half_channel(d));
        for pair in device_pairs(d, pump, opts.pairs.as_deref().or(loaded.config.pairs.as_deref()))? {
            let e = loaded.experiment(d, pair, seed, mode)?;
            pairs.push(DevicePair {
                label: format!("{} {}", d.name, format_pair(pair)),
                signal: e.signal.channel.clone(),
                idler: e.idler.channel.clone(),
            });
            base.get_or_insert(e);
        }
    }
    let base = base.ok_or_else(|| CliError::Usage("no device pairs to sweep".into()))?;
    let p0 = opts.p0.unwrap_or(loaded.config.source.p0);
    Ok(sweep_figure2(&pairs, &base, p0)?
        .into_iter()
        .map(|r| Figure2CsvRow {
            label: r.label,
            zeta_q: r.zeta_q,
            v0: r.v0.value,
            v0_sigma: r.v0.sigma,
        })
        .collect())
}

fn figure3(opts: &SweepOptions) -> CliResult<Vec<Figure3CsvRow>> {
    if opts.grid < 2 {
        return Err(CliError::Usage("--grid needs at least 2 points per axis".into()));
    }
    let axis: Vec<f64> = (0..opts.grid).map(|k| k as f64 / (opts.grid - 1) as f64).collect();
    let mut overlays = vec![];
    for path in &opts.overlays {
        for row in read_rows::<ReportRow>(path)? {
            if let Some(eta) = row.eta {
                overlays.push(OverlayPoint {
                    label: format!("{} {}", row.device, row.channel_pair),
                    v0: row.v0.clamp(0.0, 1.0),
                    eta,
                    s: row.s,
                });
            }
        }
    }
    Ok(sweep_figure3(&axis, &axis, &overlays)?.iter().map(Figure3CsvRow::from).collect())
}

fn attenuation(opts: &SweepOptions) -> CliResult<Vec<AttenuationRow>> {
    let loaded = require_config(opts)?;
    let device = sweep_devices(opts, Some(&loaded))?.remove(0);
    let pairs = loaded.pairs(&device, opts.pairs.as_deref())?;
    let db_per_km = opts.db_per_km.unwrap_or(loaded.config.link.fiber_loss_db_per_km);
    let seed = opts.seed.unwrap_or(loaded.config.seed);
    let mode = opts.mode.unwrap_or(loaded.config.mode);
    let mut rows = vec![];
    for pair in pairs {
        let e = loaded.experiment(&device, pair, seed, mode)?;
        let runs = run_attenuation_study(&e, &opts.lengths_km, db_per_km)
            .map_err(|source| CliError::Simulation { pair, source })?;
        for (run, &length) in runs.iter().zip(&opts.lengths_km) {
            let r = &run.result;
            rows.push(AttenuationRow {
                channel_pair: format_pair(pair),
                fiber_length_km: length,
                loss_db_per_arm: length * db_per_km,
                v0: r.v0.value,
                v0_sigma: r.v0.sigma,
                v45: r.v45.value,
                v45_sigma: r.v45.sigma,
                s: r.s.value,
                s_sigma: r.s.sigma,
                brightness_per_min: r.brightness_per_min,
                eta: r.eta.map(|m| m.value),
                eta_sigma: r.eta.map(|m| m.sigma),
            });
        }
    }
    Ok(rows)
}

fn default_p0_values() -> Vec<f64> {
    (1..=10).map(|k| 5e4 * k as f64).collect()
}

fn slope(opts: &SweepOptions) -> CliResult<Vec<SlopeRow>> {
    let loaded = opts.config.as_deref().map(load_config).transpose()?;
    let devices = sweep_devices(opts, loaded.as_ref())?;
    let mode = opts
        .mode
        .unwrap_or(CountingMode::Paper);
    let detector = loaded
        .as_ref()
        .map(|l| l.config.detector.params())
        .unwrap_or_else(DetectorParams::gated_ingaas);
    let loss_db = loaded.as_ref().map_or(0.0, |l| {
        let link = &l.config.link;
        link.insertion_loss_db + link.fiber_length_km * link.fiber_loss_db_per_km
    });
    let p0_values = opts.p0_values.clone().unwrap_or_else(default_p0_values);
    let mut rows = vec![];
    for d in &devices {
        let half = loaded.as_ref().map_or(d.pump_half_channel, |l| l.pump_half_channel(d));
        let pump = 2.0 * itu_channel_frequency(half);
        let requested = opts.pairs.as_deref().or(loaded.as_ref().and_then(|l| l.config.pairs.as_deref()));
        for pair in device_pairs(d, pump, requested)? {
            let missing = |n| CliError::Usage(format!("channel {n} is not in device `{}`", d.name));
            let (s, i) = (
                d.channel(pair.0).ok_or_else(|| missing(pair.0))?,
                d.channel(pair.1).ok_or_else(|| missing(pair.1))?,
            );
            let o = pair_overlap(s, i, pump)?;
            let scale = 10f64.powf(-loss_db / 10.0);
            let view = PairView::new(&o, s.peak_transmission() * scale, i.peak_transmission() * scale);
            let source = SourceParams::new(0.0, pump, 1.0)?;
            let fit = slope_quality(&source, &p0_values, &view, &detector, &detector, mode)?;
            rows.push(SlopeRow {
                device: d.name.clone(),
                channel_pair: format_pair(pair),
                zeta_q: o.zeta_q,
                slope: fit.slope,
                inverse_slope: fit.slope.recip(),
            });
        }
    }
    Ok(rows)
}

/// Runs a sweep and writes `sweep_<kind>.csv` into `opts.out`.
pub fn sweep(opts: &SweepOptions) -> CliResult<SweepOutput> {
    let output = match opts.kind {
        SweepKind::Figure2 => SweepOutput::Figure2(figure2(opts)?),
        SweepKind::Figure3 => SweepOutput::Figure3(figure3(opts)?),
        SweepKind::Attenuation => SweepOutput::Attenuation(attenuation(opts)?),
        SweepKind::Slope => SweepOutput::Slope(slope(opts)?),
    };
    ensure_dir(&opts.out)?;
    let path = opts.out.join(opts.kind.file_name());
    match &output {
        SweepOutput::Figure2(r) => write_rows(&path, r)?,
        SweepOutput::Figure3(r) => write_rows(&path, r)?,
        SweepOutput::Attenuation(r) => write_rows(&path, r)?,
        SweepOutput::Slope(r) => write_rows(&path, r)?,
    }
    Ok(output)
}

