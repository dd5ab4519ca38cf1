use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{ExperimentConfig, PlannedSetting};
use crate::counting::{coincidence_probabilities, dark, efficiency, photon_singles, DetectorParams};
use crate::error::{Error, Result};
use crate::quantum::{coincidence_probability, marginal_pass_probability, noisy_pair_state, Arm};

/// Analyzer setting of a record, by physical polarizer angle.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SettingLabel {
    pub alice_deg: f64,
    pub bob_deg: f64,
}

impl SettingLabel {
    pub(crate) fn matches(&self, alice_deg: f64, bob_deg: f64) -> bool {
        let same = |x: f64, y: f64| {
            let d = (x - y).rem_euclid(180.0);
            d < 1e-9 || 180.0 - d < 1e-9
        };
        same(self.alice_deg, alice_deg) && same(self.bob_deg, bob_deg)
    }
}

/// Tallies of one acquisition.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CountRecord {
    pub setting: SettingLabel,
    pub singles_signal: u64,
    pub singles_idler: u64,
    pub raw_coincidences: u64,
    /// Product-of-singles estimate of the accidental coincidences.
    pub accidental_estimate: f64,
    pub duration_s: f64,
    /// Ground truth: coincidences whose two clicks came from one pair.
    pub true_coincidences: u64,
    /// Ground truth: all other coincidences.
    pub accidental_coincidences: u64,
    pub windows_per_second: f64,
}

impl CountRecord {
    /// Sums two acquisitions of the same setting.
    pub fn merge(&self, other: &Self) -> Result<Self> {
        if !self.setting.matches(other.setting.alice_deg, other.setting.bob_deg)
            || self.windows_per_second != other.windows_per_second
        {
            return Err(Error::InvalidParameter("cannot merge records of different settings".into()));
        }
        let mut out = Self {
            setting: self.setting,
            singles_signal: self.singles_signal + other.singles_signal,
            singles_idler: self.singles_idler + other.singles_idler,
            raw_coincidences: self.raw_coincidences + other.raw_coincidences,
            accidental_estimate: 0.0,
            duration_s: self.duration_s + other.duration_s,
            true_coincidences: self.true_coincidences + other.true_coincidences,
            accidental_coincidences: self.accidental_coincidences + other.accidental_coincidences,
            windows_per_second: self.windows_per_second,
        };
        out.refresh_estimate();
        Ok(out)
    }

    fn refresh_estimate(&mut self) {
        let windows = self.duration_s * self.windows_per_second;
        self.accidental_estimate = self.singles_signal as f64 * self.singles_idler as f64 / windows;
    }

    /// Raw coincidences minus the accidental estimate, floored at zero.
    pub fn true_estimate(&self) -> f64 {
        (self.raw_coincidences as f64 - self.accidental_estimate).max(0.0)
    }
}

/// Per-window event rates of one setting, in units of coincidence windows.
#[derive(Debug, Clone, Copy)]
struct SettingPhysics {
    both: f64,
    signal_only: f64,
    idler_only: f64,
    dark_signal: f64,
    dark_idler: f64,
    /// Joint analyzer outcomes for a pair: (pass, pass), (pass, block), (block, pass).
    joint: [f64; 3],
    pass_signal: f64,
    pass_idler: f64,
    windows_per_gate: u64,
    dead_gates: [u64; 2],
    windows_per_second: f64,
}

impl SettingPhysics {
    fn total(&self) -> f64 {
        self.both + self.signal_only + self.idler_only + self.dark_signal + self.dark_idler
    }
}

fn physics(config: &ExperimentConfig, planned: &PlannedSetting) -> Result<SettingPhysics> {
    let pair = config.pair_view()?;
    let (da, db) = (&config.signal.detector, &config.idler.detector);
    coincidence_probabilities(&config.source, &pair, da, db, config.mode)?;
    let state = noisy_pair_state(&config.polarization_model()?)?;
    let setting = planned.setting();

    // Arrivals at the analyzers; each analyzer passes half of them on average.
    let eff = |d: &DetectorParams| efficiency(d, config.mode);
    let dark_p = |d: &DetectorParams| dark(d, config.mode);
    let arrive_a = 2.0 * photon_singles(&config.source, pair.signal, da, config.mode);
    let arrive_b = 2.0 * photon_singles(&config.source, pair.idler, db, config.mode);
    let both = 2.0
        * config.source.p0
        * pair.i2
        * pair.signal.transmission
        * pair.idler.transmission
        * da.duty()
        * da.coincidence_window_s
        * eff(da)
        * eff(db);

    let p_pp = coincidence_probability(&state, setting);
    let pass_signal = marginal_pass_probability(&state, Arm::Signal, setting.alice());
    let pass_idler = marginal_pass_probability(&state, Arm::Idler, setting.bob());
    Ok(SettingPhysics {
        both,
        signal_only: (arrive_a - both).max(0.0),
        idler_only: (arrive_b - both).max(0.0),
        dark_signal: dark_p(da),
        dark_idler: dark_p(db),
        joint: [p_pp, (pass_signal - p_pp).max(0.0), (pass_idler - p_pp).max(0.0)],
        pass_signal,
        pass_idler,
        windows_per_gate: da.windows_per_gate(),
        dead_gates: [da.dead_gates(), db.dead_gates()],
        windows_per_second: da.windows_per_second(),
    })
}

#[derive(Debug, Default, Clone, Copy)]
struct Detector {
    next_live_gate: u64,
    last_slot: Option<u64>,
    last_event: u64,
    clicks: u64,
}

impl Detector {
    /// Registers a click if the detector is live; returns whether it did.
    fn click(&mut self, slot: u64, gate: u64, event: u64, dead_gates: u64) -> bool {
        if gate < self.next_live_gate {
            return false;
        }
        self.next_live_gate = gate + 1 + dead_gates;
        self.last_slot = Some(slot);
        self.last_event = event;
        self.clicks += 1;
        true
    }
}

#[derive(Debug, Default)]
struct Tally {
    raw: u64,
    truth: u64,
    accidental: u64,
}

impl Tally {
    fn check(&mut self, me: &Detector, other: &Detector) {
        if other.last_slot == me.last_slot {
            self.raw += 1;
            if other.last_event == me.last_event {
                self.truth += 1;
            } else {
                self.accidental += 1;
            }
        }
    }
}

/// Merged Poisson stream of pair, lone-photon and dark events over the
/// acquisition, in units of coincidence windows; each gate spans
/// `windows_per_gate` windows and only one click per detector per gate counts.
fn simulate(physics: &SettingPhysics, label: SettingLabel, duration_s: f64, rng: &mut ChaCha8Rng) -> CountRecord {
    let horizon = duration_s * physics.windows_per_second;
    let total = physics.total();
    let [dead_a, dead_b] = physics.dead_gates;
    let (mut a, mut b) = (Detector::default(), Detector::default());
    let mut tally = Tally::default();

    let mut t = 0.0f64;
    let mut event = 0u64;
    if total > 0.0 {
        loop {
            let gap: f64 = Exp1.sample(rng);
            t += gap / total;
            if t >= horizon {
                break;
            }
            event += 1;
            let slot = t as u64;
            let gate = slot / physics.windows_per_gate;

            let mut u = rng.random::<f64>() * total;
            let (hit_a, hit_b) = if u < physics.both {
                let v: f64 = rng.random();
                let [pp, pb, bp] = physics.joint;
                if v < pp {
                    (true, true)
                } else if v < pp + pb {
                    (true, false)
                } else if v < pp + pb + bp {
                    (false, true)
                } else {
                    (false, false)
                }
            } else {
                u -= physics.both;
                if u < physics.signal_only {
                    (rng.random::<f64>() < physics.pass_signal, false)
                } else {
                    u -= physics.signal_only;
                    if u < physics.idler_only {
                        (false, rng.random::<f64>() < physics.pass_idler)
                    } else {
                        u -= physics.idler_only;
                        (u < physics.dark_signal, u >= physics.dark_signal)
                    }
                }
            };

            if hit_a && a.click(slot, gate, event, dead_a) {
                tally.check(&a, &b);
            }
            if hit_b && b.click(slot, gate, event, dead_b) {
                tally.check(&b, &a);
            }
        }
    }

    let mut record = CountRecord {
        setting: label,
        singles_signal: a.clicks,
        singles_idler: b.clicks,
        raw_coincidences: tally.raw,
        accidental_estimate: 0.0,
        duration_s,
        true_coincidences: tally.truth,
        accidental_coincidences: tally.accidental,
        windows_per_second: physics.windows_per_second,
    };
    record.refresh_estimate();
    record
}

/// Substream for one trial of one setting.
fn trial_rng(seed: u64, setting_index: usize, trial: u32) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(((setting_index as u64) << 32) | trial as u64);
    rng
}

/// Simulates every planned setting; the per-setting records come back in
/// plan order whether or not the trials ran in parallel.
pub(crate) fn simulate_plan(config: &ExperimentConfig, parallel: bool) -> Result<Vec<CountRecord>> {
    let physics: Vec<SettingPhysics> = config.plan.iter().map(|p| physics(config, p)).collect::<Result<_>>()?;
    let trials = config.trials_per_setting;
    let jobs: Vec<(usize, u32)> = (0..config.plan.len())
        .flat_map(|s| (0..trials).map(move |t| (s, t)))
        .collect();
    let run = |&(s, t): &(usize, u32)| {
        let p = &config.plan[s];
        let label = SettingLabel {
            alice_deg: p.alice_deg,
            bob_deg: p.bob_deg,
        };
        let mut rng = trial_rng(config.seed, s, t);
        simulate(&physics[s], label, p.duration_s / trials as f64, &mut rng)
    };
    let parts: Vec<CountRecord> = if parallel {
        jobs.par_iter().map(run).collect()
    } else {
        jobs.iter().map(run).collect()
    };
    parts
        .chunks(trials as usize)
        .map(|chunk| chunk[1..].iter().try_fold(chunk[0], |acc, r| acc.merge(r)))
        .collect()
}
