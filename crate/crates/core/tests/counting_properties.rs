use qwdm_core::counting::{
    coincidence_probabilities, rate_budget, slope_quality, CountingMode, DetectorParams, PairView, SourceParams,
};
use qwdm_core::spectral::{make_channel, pair_overlap, ChannelSpectrum, ShapeKind, TabulatedCurve};

const SIGNAL: f64 = 192.3;
const IDLER: f64 = 192.5;

fn tabulated(center: f64) -> ChannelSpectrum {
    // Measured-looking passband: 70 GHz plateau, 20 GHz linear skirts, ripple.
    let xs: Vec<f64> = (0..=240).map(|k| center - 0.06 + 0.0005 * k as f64).collect();
    let ys: Vec<f64> = xs
        .iter()
        .map(|&x| {
            let d = ((x - center) * 1000.0).abs();
            let base = if d <= 35.0 {
                1.0
            } else if d >= 55.0 {
                0.0
            } else {
                (55.0 - d) / 20.0
            };
            0.85 * base * (1.0 - 0.03 * (x * 4000.0).sin().abs())
        })
        .collect();
    ChannelSpectrum::tabulated(center, TabulatedCurve::new(xs, ys).unwrap()).unwrap()
}

fn devices() -> Vec<(&'static str, ChannelSpectrum, ChannelSpectrum)> {
    let ch = |shape, c, m| make_channel(shape, c, 100.0, 0.8, m).unwrap();
    let flat = ShapeKind::FlatTop { order: 4 };
    vec![
        ("rect", ch(ShapeKind::Rectangular, SIGNAL, 1.0), ch(ShapeKind::Rectangular, IDLER, 1.0)),
        ("gauss", ch(ShapeKind::Gaussian, SIGNAL, 5.0), ch(ShapeKind::Gaussian, IDLER, 5.0)),
        ("flat", ch(flat, SIGNAL, 2.0), ch(flat, IDLER, 2.0)),
        ("measured", tabulated(SIGNAL), tabulated(IDLER)),
    ]
}

fn slope_fit(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let (mx, my) = (x.iter().sum::<f64>() / n, y.iter().sum::<f64>() / n);
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    sxy / sxx
}

#[test]
fn brightness_linear_and_accidentals_quadratic_in_p0() {
    let d = DetectorParams::gated_ingaas();
    let (_, s, i) = &devices()[2];
    let pair = PairView::new(&pair_overlap(s, i, SIGNAL + IDLER).unwrap(), 0.5, 0.5);
    let p0s: Vec<f64> = (0..10).map(|k| 1e4 * 2f64.powi(k)).collect();
    let (mut lx, mut lb, mut la) = (vec![], vec![], vec![]);
    for &p0 in &p0s {
        let src = SourceParams::new(p0, SIGNAL + IDLER, 1.0).unwrap();
        let b = rate_budget(&src, &pair, &d, &d, CountingMode::Paper).unwrap();
        lx.push(p0.ln());
        lb.push(b.brightness_per_min.ln());
        la.push(b.p_ac.ln());
    }
    let (eb, ea) = (slope_fit(&lx, &lb), slope_fit(&lx, &la));
    assert!((eb - 1.0).abs() < 0.02, "{eb}");
    assert!((ea - 2.0).abs() < 0.02, "{ea}");
}

#[test]
fn inverse_slope_proportional_to_zeta() {
    let d = DetectorParams::gated_ingaas();
    let p0s: Vec<f64> = (1..=10).map(|k| 5e4 * k as f64).collect();
    let src = SourceParams::new(0.0, SIGNAL + IDLER, 1.0).unwrap();
    let ratios: Vec<f64> = devices()
        .iter()
        .map(|(_, s, i)| {
            let o = pair_overlap(s, i, SIGNAL + IDLER).unwrap();
            let pair = PairView::new(&o, s.peak_transmission(), i.peak_transmission());
            let fit = slope_quality(&src, &p0s, &pair, &d, &d, CountingMode::Paper).unwrap();
            1.0 / fit.slope / o.zeta_q
        })
        .collect();
    let mean = ratios.iter().sum::<f64>() / ratios.len() as f64;
    let spread = ratios.iter().map(|r| (r - mean).abs() / mean).fold(0.0, f64::max);
    assert!(spread < 0.05, "{ratios:?}");
}

#[test]
fn dark_only_accidentals() {
    let d = DetectorParams::gated_ingaas();
    let (_, s, i) = &devices()[0];
    let pair = PairView::new(&pair_overlap(s, i, SIGNAL + IDLER).unwrap(), 0.5, 0.5);
    let src = SourceParams::new(0.0, SIGNAL + IDLER, 1.0).unwrap();
    let (tc, ac) = coincidence_probabilities(&src, &pair, &d, &d, CountingMode::Full).unwrap();
    assert_eq!(tc, 0.0);
    let dark = d.dark_probability_per_window();
    assert!((ac - dark * dark).abs() < 1e-24);
    let (tc, ac) = coincidence_probabilities(&src, &pair, &d, &d, CountingMode::Paper).unwrap();
    assert_eq!((tc, ac), (0.0, 0.0));
}
