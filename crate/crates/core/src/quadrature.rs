//! Globally adaptive Gauss–Kronrod (7/15) quadrature.
//!
//! Intervals are bisected in order of largest local error estimate until the
//! summed error falls below the absolute tolerance. Known discontinuities are
//! passed as breakpoints so that no panel straddles a jump.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::error::{Error, Result};

// Kronrod abscissae on [-1, 1] (positive half, descending) and weights.
const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];
// Gauss weights for the odd-indexed Kronrod nodes (1, 3, 5, 7).
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

#[derive(Debug, Clone, Copy)]
pub struct QuadratureOptions {
    pub abs_tol: f64,
    pub max_intervals: usize,
}

impl Default for QuadratureOptions {
    fn default() -> Self {
        Self {
            abs_tol: 1e-10,
            max_intervals: 4000,
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct QuadratureResult {
    pub value: f64,
    pub error: f64,
    pub intervals: usize,
}

#[derive(Debug, Clone, Copy)]
struct Panel {
    a: f64,
    b: f64,
    value: f64,
    error: f64,
}

impl PartialEq for Panel {
    fn eq(&self, other: &Self) -> bool {
        self.error == other.error
    }
}
impl Eq for Panel {}
impl PartialOrd for Panel {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Panel {
    fn cmp(&self, other: &Self) -> Ordering {
        self.error.total_cmp(&other.error)
    }
}

fn kronrod15<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> Panel {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let fc = f(center);
    let mut kronrod = fc * WGK[7];
    let mut gauss = fc * WG[3];
    for (j, (&x, &w)) in XGK.iter().zip(WGK.iter()).take(7).enumerate() {
        let dx = half * x;
        let pair = f(center - dx) + f(center + dx);
        kronrod += w * pair;
        if j % 2 == 1 {
            gauss += WG[j / 2] * pair;
        }
    }
    Panel {
        a,
        b,
        value: kronrod * half,
        error: ((kronrod - gauss) * half).abs(),
    }
}

/// Integrates `f` over `[a, b]`, splitting first at every breakpoint that lies
/// strictly inside the interval.
pub fn integrate<F: Fn(f64) -> f64>(
    f: F,
    a: f64,
    b: f64,
    breakpoints: &[f64],
    opts: QuadratureOptions,
) -> Result<QuadratureResult> {
    if !(a.is_finite() && b.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "integration bounds must be finite, got [{a}, {b}]"
        )));
    }
    if a == b {
        return Ok(QuadratureResult {
            value: 0.0,
            error: 0.0,
            intervals: 0,
        });
    }
    let (lo, hi, sign) = if a < b { (a, b, 1.0) } else { (b, a, -1.0) };

    let mut cuts: Vec<f64> = breakpoints
        .iter()
        .copied()
        .filter(|&x| x > lo && x < hi)
        .collect();
    cuts.sort_by(f64::total_cmp);
    cuts.dedup();

    let mut heap = BinaryHeap::new();
    let mut edges = Vec::with_capacity(cuts.len() + 2);
    edges.push(lo);
    edges.extend(cuts);
    edges.push(hi);
    for w in edges.windows(2) {
        heap.push(kronrod15(&f, w[0], w[1]));
    }

    loop {
        let (value, error) = heap
            .iter()
            .fold((0.0, 0.0), |(v, e), p| (v + p.value, e + p.error));
        if error <= opts.abs_tol {
            return Ok(QuadratureResult {
                value: sign * value,
                error,
                intervals: heap.len(),
            });
        }
        let worst = heap.pop().expect("heap is never empty");
        let mid = 0.5 * (worst.a + worst.b);
        // Panels that cannot be split further in f64 terminate the refinement.
        if heap.len() + 2 > opts.max_intervals || mid <= worst.a || mid >= worst.b {
            heap.push(worst);
            return Err(Error::Numerical {
                estimate: sign * value,
                error,
                tolerance: opts.abs_tol,
            });
        }
        heap.push(kronrod15(&f, worst.a, mid));
        heap.push(kronrod15(&f, mid, worst.b));
    }
}

/// Trapezoid rule on a sampled curve.
pub fn trapezoid(xs: &[f64], ys: &[f64]) -> f64 {
    xs.windows(2)
        .zip(ys.windows(2))
        .map(|(x, y)| 0.5 * (x[1] - x[0]) * (y[0] + y[1]))
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn polynomials_are_exact() {
        let r = integrate(|x| x.powi(5) - 3.0 * x * x, -1.0, 2.0, &[], Default::default()).unwrap();
        // x^6/6 - x^3 from -1 to 2
        let exact = (64.0 / 6.0 - 8.0) - (1.0 / 6.0 + 1.0);
        assert!((r.value - exact).abs() < 1e-12);
    }

    #[test]
    fn gaussian_area() {
        let s = 3.7;
        let r = integrate(
            |x: f64| (-x * x / (2.0 * s * s)).exp(),
            -12.0 * s,
            12.0 * s,
            &[],
            Default::default(),
        )
        .unwrap();
        let exact = s * (2.0 * std::f64::consts::PI).sqrt();
        assert!((r.value - exact).abs() < 1e-9);
    }

    #[test]
    fn breakpoints_handle_step() {
        let r = integrate(
            |x: f64| if x < 0.3 { 1.0 } else { 0.0 },
            0.0,
            1.0,
            &[0.3],
            Default::default(),
        )
        .unwrap();
        assert!((r.value - 0.3).abs() < 1e-13);
    }

    #[test]
    fn reversed_bounds_flip_sign() {
        let r = integrate(|x| x, 1.0, 0.0, &[], Default::default()).unwrap();
        assert!((r.value + 0.5).abs() < 1e-14);
    }

    #[test]
    fn failure_reports_estimate() {
        let opts = QuadratureOptions {
            abs_tol: 1e-14,
            max_intervals: 3,
        };
        let err = integrate(|x: f64| (1.0 / x).sin(), 1e-3, 1.0, &[], opts).unwrap_err();
        match err {
            Error::Numerical { estimate, .. } => assert!(estimate.is_finite()),
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn trapezoid_linear_is_exact() {
        let xs = [0.0, 0.5, 2.0];
        let ys = [1.0, 2.0, 5.0];
        assert!((trapezoid(&xs, &ys) - 6.0).abs() < 1e-15);
    }
}
