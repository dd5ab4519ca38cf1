use std::f64::consts::SQRT_2;

use qwdm_core::counting::CountingMode;
use qwdm_core::quantum::Measured;
use qwdm_core::montecarlo::{
    calibrate, dtf_like_config, predict, run_attenuation_study, run_bell_experiment, run_bell_experiment_serial,
    standard_plan, sweep_figure2, DevicePair, EtaSource, ExperimentConfig,
};
use qwdm_core::spectral::{make_channel, ShapeKind};
use qwdm_core::Error;

fn within(m: Measured, target: f64, n_sigma: f64) -> bool {
    (m.value - target).abs() <= n_sigma * m.sigma
}

/// Lossless, unit-efficiency pair with little background.
fn bright_config(seed: u64) -> ExperimentConfig {
    let mut c = dtf_like_config(0.5, seed).unwrap();
    c.mode = CountingMode::Paper;
    c.source.p0 = 1.5e5;
    c
}

/// Unit-efficiency pair behind 20 dB per arm, pumped hard enough for a
/// visible accidental background.
fn lossy_config(seed: u64) -> ExperimentConfig {
    let mut c = bright_config(seed);
    c.source.p0 = 4e7;
    c.signal.insertion_loss_db = 20.0;
    c.idler.insertion_loss_db = 20.0;
    c.plan = standard_plan(5.0);
    c
}

#[test]
fn identical_seed_is_bit_identical_serial_or_parallel() {
    let mut c = bright_config(42);
    c.trials_per_setting = 2;
    let a = run_bell_experiment(&c).unwrap();
    let b = run_bell_experiment(&c).unwrap();
    let s = run_bell_experiment_serial(&c).unwrap();
    assert_eq!(a, b);
    assert_eq!(a, s);
}

#[test]
fn different_seeds_agree_statistically() {
    let a = run_bell_experiment(&bright_config(1)).unwrap().result;
    let b = run_bell_experiment(&bright_config(2)).unwrap().result;
    assert_ne!(a, b);
    for (x, y) in [(a.v0, b.v0), (a.v45, b.v45), (a.s, b.s)] {
        assert!((x.value - y.value).abs() < 3.0 * x.sigma.hypot(y.sigma), "{x:?} {y:?}");
    }
}

#[test]
fn paper_mode_visibility_matches_vmax() {
    let c = lossy_config(9);
    let run = run_bell_experiment(&c).unwrap();
    let v_max = run.budget.unwrap().v_max;
    assert!(v_max < 0.99);
    assert!(within(run.result.v0, v_max, 3.0), "{:?} vs {v_max}", run.result.v0);
}

#[test]
fn simulation_tracks_analytic_state() {
    let shapes = [
        ShapeKind::Rectangular,
        ShapeKind::Gaussian,
        ShapeKind::FlatTop { order: 4 },
    ];
    for (k, shape) in shapes.into_iter().enumerate() {
        for mode in [CountingMode::Paper, CountingMode::Full] {
            let mut c = dtf_like_config(1.0, 100 + k as u64).unwrap();
            let m = if shape == ShapeKind::Rectangular { 1.0 } else { 4.0 };
            c.signal.channel = make_channel(shape, c.signal.channel.center_thz(), 80.0, 0.7, m).unwrap();
            c.idler.channel = make_channel(shape, c.idler.channel.center_thz(), 80.0, 0.9, m).unwrap();
            c.mode = mode;
            c.source.baseline_v0 = 0.9;
            c.eta = EtaSource::Explicit { eta: 0.8 };
            c.source.p0 = if mode == CountingMode::Paper { 2e5 } else { 1e6 };
            let per_setting = 3000.0 / (c.rate_budget().unwrap().p_tc * c.signal.detector.windows_per_second());
            c.plan = standard_plan(per_setting);
            let pred = predict(&c).unwrap();
            let r = run_bell_experiment(&c).unwrap().result;
            assert!(within(r.v0, pred.v0, 3.0), "{shape:?} {mode:?} V0 {:?} vs {}", r.v0, pred.v0);
            assert!(within(r.v45, pred.v45, 3.0), "{shape:?} {mode:?} V45 {:?} vs {}", r.v45, pred.v45);
            assert!(within(r.s, pred.s, 3.0), "{shape:?} {mode:?} S {:?} vs {}", r.s, pred.s);
        }
    }
}

#[test]
fn ground_truth_accidentals_below_product_estimate() {
    let runs = 100;
    let mut below = 0;
    for seed in 0..runs {
        let mut c = bright_config(seed);
        c.source.p0 = 4e5;
        c.plan = standard_plan(4.0);
        let recs = run_bell_experiment(&c).unwrap().records;
        let truth: u64 = recs.iter().map(|r| r.accidental_coincidences).sum();
        let est: f64 = recs.iter().map(|r| r.accidental_estimate).sum();
        if (truth as f64) <= est {
            below += 1;
        }
    }
    assert!(below * 100 >= 99 * runs, "{below}/{runs}");
}

#[test]
fn brightness_scales_with_each_arm() {
    let losses_db = [0.0, 3.0, 6.0, 9.0];
    let (mut x, mut y) = (vec![], vec![]);
    for &l in &losses_db {
        let mut c = bright_config(5);
        c.plan = standard_plan(2.0);
        c.signal.insertion_loss_db = l;
        let r = run_bell_experiment(&c).unwrap();
        x.push(c.signal.end_to_end_transmission().ln());
        y.push(r.result.brightness_per_min.ln());
    }
    let n = x.len() as f64;
    let (mx, my) = (x.iter().sum::<f64>() / n, y.iter().sum::<f64>() / n);
    let slope = x.iter().zip(&y).map(|(a, b)| (a - mx) * (b - my)).sum::<f64>()
        / x.iter().map(|a| (a - mx).powi(2)).sum::<f64>();
    assert!((slope - 1.0).abs() < 0.05, "{slope}");
}

/// Calibrated pair with a sixfold dark rate so that loss visibly erodes S.
fn noisy_calibrated(duration: f64) -> ExperimentConfig {
    let mut base = dtf_like_config(duration, 77).unwrap();
    for arm in [&mut base.signal, &mut base.idler] {
        arm.detector.dark_count_rate_hz = 3000.0;
    }
    calibrate(&base, 540.0, 2.4).unwrap().config
}

#[test]
fn fiber_study_zero_length_is_base_and_loss_erodes_s() {
    let c = noisy_calibrated(120.0);
    let study = run_attenuation_study(&c, &[0.0, 10.0], 0.2).unwrap();
    assert_eq!(study[0], run_bell_experiment(&c).unwrap());
    let (s0, s10) = (study[0].result.s, study[1].result.s);
    assert!(s10.value < s0.value - 3.0 * s0.sigma.hypot(s10.sigma), "{s0:?} {s10:?}");
    assert!(study[1].result.brightness_per_min < study[0].result.brightness_per_min);
}

#[test]
fn dark_only_bell_parameter_vanishes() {
    let mut c = dtf_like_config(200.0, 3).unwrap();
    c.source.p0 = 0.0;
    for arm in [&mut c.signal, &mut c.idler] {
        arm.detector.dark_count_rate_hz = 5000.0;
    }
    let run = run_bell_experiment(&c).unwrap();
    assert!(run.budget.is_none());
    assert!(within(run.result.s, 0.0, 3.0), "{:?}", run.result.s);
    assert!(within(run.result.v0, 0.0, 3.0), "{:?}", run.result.v0);
}

#[test]
fn long_fiber_is_dark_count_dominated() {
    let c = noisy_calibrated(200.0);
    let run = &run_attenuation_study(&c, &[150.0], 0.2).unwrap()[0];
    assert!(within(run.result.s, 0.0, 3.0), "{:?}", run.result.s);
}

#[test]
fn without_any_coincidence_reports_partial_records() {
    let mut c = dtf_like_config(1e-3, 3).unwrap();
    c.source.p0 = 0.0;
    match run_bell_experiment(&c) {
        Err(Error::InsufficientStatistics { partial, .. }) => assert_eq!(partial.len(), 32),
        other => panic!("{other:?}"),
    }
}

#[test]
fn calibrated_to_085_reproduces_closed_form() {
    let base = dtf_like_config(600.0, 21).unwrap();
    let target_s = SQRT_2 * 0.85 * 2.0;
    let cal = calibrate(&base, 540.0, target_s).unwrap();
    assert!((cal.prediction.v0 - 0.85).abs() < 1e-6);
    let r = run_bell_experiment(&cal.config).unwrap().result;
    assert!(within(r.s, target_s, 3.0), "{:?}", r.s);
    assert!(within(r.v0, 0.85, 3.0), "{:?}", r.v0);
}

#[test]
fn quality_factor_orders_visibility() {
    let mut base = lossy_config(8);
    base.plan = standard_plan(40.0);
    let ch = |shape, c, m| make_channel(shape, c, 100.0, 0.9, m).unwrap();
    let (s, i) = (base.signal.channel.center_thz(), base.idler.channel.center_thz());
    let devices = vec![
        DevicePair {
            label: "rect".into(),
            signal: ch(ShapeKind::Rectangular, s, 1.0),
            idler: ch(ShapeKind::Rectangular, i, 1.0),
        },
        DevicePair {
            label: "gauss".into(),
            signal: ch(ShapeKind::Gaussian, s, 5.0),
            idler: ch(ShapeKind::Gaussian, i, 5.0),
        },
    ];
    let rows = sweep_figure2(&devices, &base, 4e7).unwrap();
    assert!(rows[0].zeta_q > rows[1].zeta_q);
    assert!(rows[0].v0.value - rows[1].v0.value > 3.0 * rows[0].v0.sigma.hypot(rows[1].v0.sigma), "{rows:?}");

    let single = sweep_figure2(&devices[..1], &base, 4e7).unwrap();
    assert_eq!(single.len(), 1);

    let mut quiet = bright_config(8);
    quiet.source.baseline_v0 = 0.93;
    quiet.plan = standard_plan(20.0);
    let faint = sweep_figure2(&devices, &quiet, 2e3).unwrap();
    for row in &faint {
        assert!(within(row.v0, 0.93, 3.0), "{row:?}");
    }
}
