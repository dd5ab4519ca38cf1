use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Result;
use clap::{Parser, Subcommand};
use qwdm_cli::commands::{
    characterize, ingest_check, simulate, sweep, CharacterizeOptions, SimulateOptions, SweepKind, SweepOptions,
    SweepOutput, ZETA_FILE,
};
use qwdm_cli::device::{format_pair, parse_pairs};
use qwdm_core::counting::CountingMode;

#[derive(Parser)]
#[command(name = "qwdm", version, about = "Entanglement distribution over DWDM channel pairs")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Validate a device directory and list its symmetric channel pairs.
    IngestCheck {
        #[arg(long)]
        device: PathBuf,
    },
    /// Quality factor of each symmetric channel pair.
    Characterize {
        #[arg(long)]
        device: Option<PathBuf>,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, value_parser = pairs_arg)]
        pairs: Option<PairList>,
        /// ITU channel at half the pump frequency.
        #[arg(long, conflicts_with = "pump_thz")]
        pump_half_channel: Option<u32>,
        #[arg(long)]
        pump_thz: Option<f64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Monte Carlo Bell test per channel pair.
    Simulate {
        #[arg(long, required_unless_present = "manifest")]
        config: Option<PathBuf>,
        /// Rerun from a previous manifest, checking the outputs match.
        #[arg(long)]
        manifest: Option<PathBuf>,
        #[arg(long)]
        device: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        mode: Option<CountingMode>,
        #[arg(long, value_parser = pairs_arg)]
        pairs: Option<PairList>,
        #[arg(long, default_value = "out")]
        out: PathBuf,
        /// Evaluate settings one at a time.
        #[arg(long)]
        serial: bool,
    },
    /// Plot data for one of the standard sweeps.
    Sweep {
        #[arg(value_enum)]
        kind: SweepKind,
        #[arg(long)]
        config: Option<PathBuf>,
        /// Repeat for several devices.
        #[arg(long)]
        device: Vec<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        mode: Option<CountingMode>,
        #[arg(long, value_parser = pairs_arg)]
        pairs: Option<PairList>,
        #[arg(long, default_value = "out")]
        out: PathBuf,
        /// Points per axis (figure3).
        #[arg(long, default_value_t = 11)]
        grid: usize,
        /// Report CSV whose rows are drawn over the contour (figure3).
        #[arg(long)]
        overlay: Vec<PathBuf>,
        /// Fiber length per arm, km (attenuation).
        #[arg(long, value_delimiter = ',', default_value = "0,10")]
        lengths: Vec<f64>,
        #[arg(long)]
        db_per_km: Option<f64>,
        /// Pump strength (figure2).
        #[arg(long)]
        p0: Option<f64>,
        /// Pump strengths to fit over (slope).
        #[arg(long, value_delimiter = ',')]
        p0_values: Option<Vec<f64>>,
    },
}

#[derive(Clone)]
struct PairList(Vec<(u32, u32)>);

fn pairs_arg(s: &str) -> Result<PairList, String> {
    parse_pairs(s).map(PairList).map_err(|e| e.to_string())
}

fn run(cli: Cli) -> Result<bool> {
    match cli.command {
        Command::IngestCheck { device } => {
            let s = ingest_check(&device)?;
            let p = &s.profile;
            println!("device {} ({:?}), {} channels", p.name, p.technology, p.channels.len());
            let pairs: Vec<String> = s.pairs.iter().map(|&q| format_pair(q)).collect();
            println!("symmetric pairs: {}", pairs.join(" "));
            println!("fingerprint {}", p.fingerprint);
        }
        Command::Characterize {
            device,
            config,
            pairs,
            pump_half_channel,
            pump_thz,
            out,
        } => {
            let rows = characterize(&CharacterizeOptions {
                device,
                config,
                pairs: pairs.map(|p| p.0),
                pump_half_channel,
                pump_thz,
                out: out.clone(),
            })?;
            println!("device,channel_pair,zeta_Q");
            for r in &rows {
                println!("{},{},{:.6}", r.device, r.channel_pair, r.zeta_q);
            }
            if let Some(out) = out {
                eprintln!("wrote {}", out.join(ZETA_FILE).display());
            }
        }
        Command::Simulate {
            config,
            manifest,
            device,
            seed,
            mode,
            pairs,
            out,
            serial,
        } => {
            let outcome = simulate(&SimulateOptions {
                config,
                manifest,
                device,
                seed,
                mode,
                pairs: pairs.map(|p| p.0),
                out: out.clone(),
                serial,
            })?;
            for r in &outcome.rows {
                let eta = r
                    .eta
                    .zip(r.eta_sigma)
                    .map_or("-".to_string(), |(e, s)| format!("{e:.3}±{s:.3}"));
                println!(
                    "{} {}: V0 = {:.3}±{:.3}  V45 = {:.3}±{:.3}  S = {:.3}±{:.3}  {:.0}/min  ζ_Q = {:.3}  η = {eta}",
                    r.device,
                    r.channel_pair,
                    r.v0,
                    r.v0_sigma,
                    r.v45,
                    r.v45_sigma,
                    r.s,
                    r.s_sigma,
                    r.brightness_per_min,
                    r.zeta_q
                );
            }
            for f in &outcome.failures {
                eprintln!("error: {f}");
            }
            eprintln!("wrote {}", out.display());
            return Ok(outcome.succeeded());
        }
        Command::Sweep {
            kind,
            config,
            device,
            seed,
            mode,
            pairs,
            out,
            grid,
            overlay,
            lengths,
            db_per_km,
            p0,
            p0_values,
        } => {
            let opts = SweepOptions {
                config,
                devices: device,
                seed,
                mode,
                pairs: pairs.map(|p| p.0),
                grid,
                overlays: overlay,
                lengths_km: lengths,
                db_per_km,
                p0,
                p0_values,
                ..SweepOptions::new(kind, out.clone())
            };
            let output = sweep(&opts)?;
            if let SweepOutput::Attenuation(rows) = &output {
                for r in rows {
                    println!("{} {} km: S = {:.3}±{:.3}", r.channel_pair, r.fiber_length_km, r.s, r.s_sigma);
                }
            }
            eprintln!("wrote {} rows to {}", output.len(), out.join(kind.file_name()).display());
        }
    }
    Ok(true)
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
