//! Two-photon polarization states over the basis {HH, HV, VH, VV}.
//!
//! Analyzer settings are Bloch angles in the x–z plane: a linear polarizer at
//! physical angle θ projects onto Bloch angle 2θ, so H = 0, V = π, D = π/2.

use std::f64::consts::{PI, SQRT_2};

use nalgebra::{Matrix2, Matrix3, Matrix4, SymmetricEigen};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{ensure, Error, Result};

pub type DensityMatrix = Matrix4<Complex64>;

const HERMITIAN_TOL: f64 = 1e-12;
const TRACE_TOL: f64 = 1e-12;
const EIGEN_FLOOR: f64 = -1e-10;

/// Bloch angle of the natural (H/V) basis.
pub const NATURAL_BASIS: f64 = 0.0;
/// Bloch angle of the diagonal (D/A) basis, i.e. a 45° polarizer.
pub const DIAGONAL_BASIS: f64 = PI / 2.0;

fn c(re: f64) -> Complex64 {
    Complex64::new(re, 0.0)
}

/// Validated 4×4 density matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct TwoQubitState {
    rho: DensityMatrix,
}

impl TwoQubitState {
    pub fn new(rho: DensityMatrix) -> Result<Self> {
        let herm_err = (rho - rho.adjoint()).iter().map(|z| z.norm()).fold(0.0, f64::max);
        ensure(herm_err < HERMITIAN_TOL, || {
            format!("matrix is not Hermitian (max deviation {herm_err:e})")
        })?;
        let trace = rho.trace();
        ensure((trace.re - 1.0).abs() < TRACE_TOL && trace.im.abs() < TRACE_TOL, || {
            format!("trace {trace} is not 1")
        })?;
        let min_eig = SymmetricEigen::new(rho)
            .eigenvalues
            .iter()
            .copied()
            .fold(f64::INFINITY, f64::min);
        ensure(min_eig >= EIGEN_FLOOR, || {
            format!("matrix is not positive semidefinite (eigenvalue {min_eig:e})")
        })?;
        Ok(Self { rho })
    }

    pub fn matrix(&self) -> &DensityMatrix {
        &self.rho
    }

    pub fn purity(&self) -> f64 {
        (self.rho * self.rho).trace().re
    }

    pub fn eigenvalues(&self) -> Vec<f64> {
        SymmetricEigen::new(self.rho).eigenvalues.iter().copied().collect()
    }

    /// Row-major entries, HH first.
    pub fn to_row_major(&self) -> [Complex64; 16] {
        std::array::from_fn(|k| self.rho[(k / 4, k % 4)])
    }

    pub fn from_row_major(entries: &[Complex64; 16]) -> Result<Self> {
        Self::new(Matrix4::from_fn(|r, c| entries[4 * r + c]))
    }

    pub fn maximally_mixed() -> Self {
        Self {
            rho: DensityMatrix::identity() * c(0.25),
        }
    }
}

/// |Φ⁺⟩⟨Φ⁺| with |Φ⁺⟩ = (|HH⟩ + |VV⟩)/√2.
pub fn bell_phi_plus() -> TwoQubitState {
    let mut rho = DensityMatrix::zeros();
    for &(r, col) in &[(0, 0), (0, 3), (3, 0), (3, 3)] {
        rho[(r, col)] = c(0.5);
    }
    TwoQubitState { rho }
}

/// `V0 ρ + (1 − V0) 𝟙/4`.
pub fn apply_werner(state: &TwoQubitState, v0: f64) -> Result<TwoQubitState> {
    ensure((0.0..=1.0).contains(&v0), || format!("V0 = {v0} outside [0, 1]"))?;
    Ok(TwoQubitState {
        rho: state.rho * c(v0) + DensityMatrix::identity() * c((1.0 - v0) / 4.0),
    })
}

/// Dephasing on the second photon:
/// `(1+η)/2 ρ + (1−η)/2 (𝟙⊗σz) ρ (𝟙⊗σz)`.
pub fn apply_dephasing(state: &TwoQubitState, eta: f64) -> Result<TwoQubitState> {
    ensure((0.0..=1.0).contains(&eta), || format!("η = {eta} outside [0, 1]"))?;
    let z2 = DensityMatrix::from_diagonal(&nalgebra::Vector4::new(c(1.0), c(-1.0), c(1.0), c(-1.0)));
    let flipped = z2 * state.rho * z2;
    Ok(TwoQubitState {
        rho: state.rho * c((1.0 + eta) / 2.0) + flipped * c((1.0 - eta) / 2.0),
    })
}

/// The noisy, PMD-dephased pair state used throughout: dephase(werner(Φ⁺, V0), η).
pub fn noisy_pair_state(model: &PolarizationModel) -> Result<TwoQubitState> {
    apply_dephasing(&apply_werner(&bell_phi_plus(), model.v0)?, model.eta)
}

/// Effective visibility and PMD overlap of the emitted pairs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PolarizationModel {
    pub v0: f64,
    pub eta: f64,
    /// Differential PMD delay the overlap was derived from, if any.
    pub tau_pmd_ps: Option<f64>,
}

impl PolarizationModel {
    pub fn new(v0: f64, eta: f64) -> Result<Self> {
        ensure((0.0..=1.0).contains(&v0), || format!("V0 = {v0} outside [0, 1]"))?;
        ensure((0.0..=1.0).contains(&eta), || format!("η = {eta} outside [0, 1]"))?;
        Ok(Self {
            v0,
            eta,
            tau_pmd_ps: None,
        })
    }
}

/// Analyzer Bloch angles for the two arms.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeasurementSetting {
    alice: f64,
    bob: f64,
}

impl MeasurementSetting {
    pub fn new(alice: f64, bob: f64) -> Self {
        Self {
            alice: alice.rem_euclid(2.0 * PI),
            bob: bob.rem_euclid(2.0 * PI),
        }
    }

    /// From physical polarizer angles in degrees.
    pub fn from_polarizer_degrees(alice: f64, bob: f64) -> Self {
        Self::new(2.0 * alice.to_radians(), 2.0 * bob.to_radians())
    }

    pub fn alice(&self) -> f64 {
        self.alice
    }

    pub fn bob(&self) -> f64 {
        self.bob
    }
}

fn projector(bloch: f64) -> Matrix2<Complex64> {
    let (s, co) = bloch.sin_cos();
    Matrix2::new(c((1.0 + co) / 2.0), c(s / 2.0), c(s / 2.0), c((1.0 - co) / 2.0))
}

fn observable(bloch: f64) -> Matrix2<Complex64> {
    let (s, co) = bloch.sin_cos();
    Matrix2::new(c(co), c(s), c(s), c(-co))
}

fn kron(a: &Matrix2<Complex64>, b: &Matrix2<Complex64>) -> Matrix4<Complex64> {
    Matrix4::from_fn(|r, col| a[(r / 2, col / 2)] * b[(r % 2, col % 2)])
}

fn expectation(state: &TwoQubitState, op: &Matrix4<Complex64>) -> f64 {
    (state.rho * op).trace().re
}

/// `Tr(ρ Π_a ⊗ Π_b)`.
pub fn coincidence_probability(state: &TwoQubitState, setting: MeasurementSetting) -> f64 {
    let op = kron(&projector(setting.alice), &projector(setting.bob));
    expectation(state, &op).clamp(0.0, 1.0)
}

/// Probability that the given arm's photon passes its analyzer, ignoring the other arm.
pub fn marginal_pass_probability(state: &TwoQubitState, arm: Arm, bloch: f64) -> f64 {
    let id = Matrix2::identity();
    let op = match arm {
        Arm::Signal => kron(&projector(bloch), &id),
        Arm::Idler => kron(&id, &projector(bloch)),
    };
    expectation(state, &op).clamp(0.0, 1.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Arm {
    Signal,
    Idler,
}

/// `E(a, b) = ⟨A(a) ⊗ B(b)⟩` for ±1-valued analyzers.
pub fn correlator(state: &TwoQubitState, setting: MeasurementSetting) -> f64 {
    expectation(state, &kron(&observable(setting.alice), &observable(setting.bob)))
}

const SCAN_POINTS: usize = 720;

/// Fringe visibility with arm A fixed at `basis_angle` (Bloch) while arm B
/// sweeps a full period.
pub fn visibility(state: &TwoQubitState, basis_angle: f64) -> Result<f64> {
    let fringe = |b: f64| coincidence_probability(state, MeasurementSetting::new(basis_angle, b));
    let step = 2.0 * PI / SCAN_POINTS as f64;
    let samples: Vec<f64> = (0..SCAN_POINTS).map(|k| fringe(k as f64 * step)).collect();
    let argext = |better: fn(f64, f64) -> bool| {
        let mut best = 0;
        for k in 1..SCAN_POINTS {
            if better(samples[k], samples[best]) {
                best = k;
            }
        }
        best
    };
    let k_max = argext(|a, b| a > b);
    let k_min = argext(|a, b| a < b);
    let c_max = golden_max(&fringe, k_max as f64 * step, step).max(samples[k_max]).max(0.0);
    let c_min = (-golden_max(&|b| -fringe(b), k_min as f64 * step, step))
        .min(samples[k_min])
        .max(0.0);
    if c_max + c_min <= 0.0 {
        return Err(Error::UndefinedVisibility);
    }
    Ok((c_max - c_min) / (c_max + c_min))
}

/// Golden-section maximization of `f` on `[x0 − h, x0 + h]`.
fn golden_max<F: Fn(f64) -> f64>(f: &F, x0: f64, h: f64) -> f64 {
    let g = (5f64.sqrt() - 1.0) / 2.0;
    let (mut a, mut b) = (x0 - h, x0 + h);
    let mut x1 = b - g * (b - a);
    let mut x2 = a + g * (b - a);
    let (mut f1, mut f2) = (f(x1), f(x2));
    for _ in 0..60 {
        if f1 > f2 {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - g * (b - a);
            f1 = f(x1);
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + g * (b - a);
            f2 = f(x2);
        }
    }
    f1.max(f2).max(f(x0))
}

/// Canonical CHSH Bloch angles: a = 0, a′ = π/2, b = π/4, b′ = 3π/4.
pub const CHSH_ANGLES: [f64; 4] = [0.0, PI / 2.0, PI / 4.0, 3.0 * PI / 4.0];

/// `E(a,b) − E(a,b′) + E(a′,b) + E(a′,b′)` at [`CHSH_ANGLES`].
pub fn chsh_fixed_angles(state: &TwoQubitState) -> f64 {
    let [a, a2, b, b2] = CHSH_ANGLES;
    let e = |x, y| correlator(state, MeasurementSetting::new(x, y));
    e(a, b) - e(a, b2) + e(a2, b) + e(a2, b2)
}

/// Correlation tensor `T_ij = Tr(ρ σ_i ⊗ σ_j)`, i, j ∈ {x, y, z}.
pub fn correlation_matrix(state: &TwoQubitState) -> Matrix3<f64> {
    let i = Complex64::i();
    let paulis = [
        Matrix2::new(c(0.0), c(1.0), c(1.0), c(0.0)),
        Matrix2::new(c(0.0), -i, i, c(0.0)),
        Matrix2::new(c(1.0), c(0.0), c(0.0), c(-1.0)),
    ];
    Matrix3::from_fn(|r, col| expectation(state, &kron(&paulis[r], &paulis[col])))
}

/// Maximal CHSH value over all settings, `2√(m₁ + m₂)` with m₁, m₂ the two
/// largest eigenvalues of `TᵀT`.
pub fn chsh_optimal(state: &TwoQubitState) -> f64 {
    let t = correlation_matrix(state);
    let mut eig: Vec<f64> = SymmetricEigen::new(t.transpose() * t).eigenvalues.iter().copied().collect();
    eig.sort_by(|a, b| b.total_cmp(a));
    2.0 * (eig[0] + eig[1]).max(0.0).sqrt()
}

/// A measured value with its 1σ uncertainty.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Measured {
    pub value: f64,
    pub sigma: f64,
}

impl Measured {
    pub fn new(value: f64, sigma: f64) -> Self {
        Self { value, sigma }
    }
}

/// Both single-relation η estimators and their inverse-variance combination.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EtaEstimate {
    /// `V45 / V0`.
    pub from_visibilities: Measured,
    /// `S / (√2 V0) − 1`.
    pub from_bell: Measured,
    /// Weighted combination clamped to [0, 1].
    pub combined: Measured,
}

/// Inverse-variance weighted combination of `η_a = V45/V0` and
/// `η_b = S/(√2 V0) − 1`, with first-order error propagation for each.
pub fn estimate_eta(v0: Measured, v45: Measured, s: Measured) -> Result<EtaEstimate> {
    if v0.value <= 0.0 {
        return Err(Error::DegenerateInput(format!("V0 = {} must be positive", v0.value)));
    }
    ensure(v0.sigma > 0.0 && v45.sigma > 0.0 && s.sigma > 0.0, || {
        "uncertainties must be positive".into()
    })?;
    let v = v0.value;
    let eta_a = v45.value / v;
    let sig_a = ((v45.sigma / v).powi(2) + (v45.value * v0.sigma / (v * v)).powi(2)).sqrt();
    let eta_b = s.value / (SQRT_2 * v) - 1.0;
    let sig_b = ((s.sigma / (SQRT_2 * v)).powi(2) + (s.value * v0.sigma / (SQRT_2 * v * v)).powi(2)).sqrt();
    let (wa, wb) = (sig_a.powi(-2), sig_b.powi(-2));
    let eta = (wa * eta_a + wb * eta_b) / (wa + wb);
    Ok(EtaEstimate {
        from_visibilities: Measured::new(eta_a, sig_a),
        from_bell: Measured::new(eta_b, sig_b),
        combined: Measured::new(eta.clamp(0.0, 1.0), (wa + wb).sqrt().recip()),
    })
}

/// `S = √2 V0 (1 + η)`.
pub fn bell_parameter(v0: f64, eta: f64) -> f64 {
    SQRT_2 * v0 * (1.0 + eta)
}

/// `V0` on the `S = 2` contour for a given η.
pub fn classical_boundary_v0(eta: f64) -> f64 {
    SQRT_2 / (1.0 + eta)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use std::f64::consts::FRAC_1_SQRT_2;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn rho3(v0: f64, eta: f64) -> TwoQubitState {
        noisy_pair_state(&PolarizationModel::new(v0, eta).unwrap()).unwrap()
    }

    fn setting_deg(a: f64, b: f64) -> MeasurementSetting {
        MeasurementSetting::from_polarizer_degrees(a, b)
    }

    #[test]
    fn phi_plus_entries_and_purity() {
        let s = bell_phi_plus();
        for r in 0..4 {
            for col in 0..4 {
                let corner = (r == 0 || r == 3) && (col == 0 || col == 3);
                let expected = if corner { 0.5 } else { 0.0 };
                assert_eq!(s.matrix()[(r, col)], c(expected));
            }
        }
        assert_abs_diff_eq!(s.purity(), 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(visibility(&s, NATURAL_BASIS).unwrap(), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn werner_limits_and_table_value() {
        let phi = bell_phi_plus();
        assert_eq!(apply_werner(&phi, 1.0).unwrap(), phi);
        let mixed = apply_werner(&phi, 0.0).unwrap();
        for k in 0..4 {
            assert_abs_diff_eq!(mixed.matrix()[(k, k)].re, 0.25, epsilon = 1e-15);
        }
        let w = apply_werner(&phi, 0.85).unwrap();
        let m = w.matrix();
        assert_abs_diff_eq!(m[(0, 0)].re, 0.4625, epsilon = 1e-15);
        assert_abs_diff_eq!(m[(1, 1)].re, 0.0375, epsilon = 1e-15);
        assert_abs_diff_eq!(m[(2, 2)].re, 0.0375, epsilon = 1e-15);
        assert_abs_diff_eq!(m[(3, 3)].re, 0.4625, epsilon = 1e-15);
        assert_abs_diff_eq!(m[(0, 3)].re, 0.425, epsilon = 1e-15);
        assert_abs_diff_eq!(m[(3, 0)].re, 0.425, epsilon = 1e-15);
        assert!(apply_werner(&phi, 1.1).is_err());
        assert!(apply_werner(&phi, -0.1).is_err());
    }

    #[test]
    fn dephasing_limits_and_corner() {
        let w = apply_werner(&bell_phi_plus(), 0.8).unwrap();
        assert_eq!(apply_dephasing(&w, 1.0).unwrap(), w);
        let d = apply_dephasing(&w, 0.0).unwrap();
        assert_abs_diff_eq!(d.matrix()[(0, 3)].norm(), 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(d.matrix()[(0, 0)].re, w.matrix()[(0, 0)].re, epsilon = 1e-15);
        let r = apply_dephasing(&w, 0.6).unwrap();
        assert_abs_diff_eq!(r.matrix()[(0, 3)].re, 0.6 * 0.8 / 2.0, epsilon = 1e-15);
        assert!(apply_dephasing(&w, 1.5).is_err());
    }

    #[test]
    fn coincidence_probabilities_of_phi_plus() {
        let phi = bell_phi_plus();
        assert_abs_diff_eq!(coincidence_probability(&phi, setting_deg(0.0, 0.0)), 0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(coincidence_probability(&phi, setting_deg(0.0, 90.0)), 0.0, epsilon = 1e-15);
        let mixed = TwoQubitState::maximally_mixed();
        for (a, b) in [(0.0, 0.0), (13.0, 71.0), (45.0, 135.0)] {
            assert_abs_diff_eq!(coincidence_probability(&mixed, setting_deg(a, b)), 0.25, epsilon = 1e-15);
        }
    }

    #[test]
    fn visibility_identities() {
        let s = rho3(0.83, 0.71);
        assert_abs_diff_eq!(visibility(&s, NATURAL_BASIS).unwrap(), 0.83, epsilon = 1e-9);
        assert_abs_diff_eq!(visibility(&s, DIAGONAL_BASIS).unwrap(), 0.71 * 0.83, epsilon = 1e-9);
        let phi = bell_phi_plus();
        assert_abs_diff_eq!(visibility(&phi, 1.234).unwrap(), 1.0, epsilon = 1e-9);
    }

    #[test]
    fn visibility_matches_dense_grid_oracle() {
        // Dense-grid oracle, independent of the refinement step.
        let s = rho3(0.62, 0.4);
        for a in [NATURAL_BASIS, DIAGONAL_BASIS, 0.3] {
            let vals: Vec<f64> = (0..200_000)
                .map(|k| coincidence_probability(&s, MeasurementSetting::new(a, k as f64 * 2.0 * PI / 200_000.0)))
                .collect();
            let mx = vals.iter().copied().fold(f64::MIN, f64::max);
            let mn = vals.iter().copied().fold(f64::MAX, f64::min);
            assert_abs_diff_eq!(visibility(&s, a).unwrap(), (mx - mn) / (mx + mn), epsilon = 1e-9);
        }
    }

    #[test]
    fn chsh_examples() {
        assert_abs_diff_eq!(chsh_fixed_angles(&bell_phi_plus()), 2.0 * SQRT_2, epsilon = 1e-12);
        assert_abs_diff_eq!(chsh_optimal(&bell_phi_plus()), 2.0 * SQRT_2, epsilon = 1e-12);
        assert_abs_diff_eq!(chsh_fixed_angles(&rho3(0.85, 1.0)), 2.404, epsilon = 1e-3);
        assert_abs_diff_eq!(chsh_fixed_angles(&rho3(0.5, 0.0)), 0.707, epsilon = 1e-3);
        let s = rho3(0.85, 0.5);
        assert_abs_diff_eq!(chsh_optimal(&s), 2.0 * 0.85 * 1.25f64.sqrt(), epsilon = 1e-12);
        assert_abs_diff_eq!(chsh_optimal(&s), 1.9007, epsilon = 1e-4);
        assert_abs_diff_eq!(chsh_fixed_angles(&s), 1.8031, epsilon = 1e-4);
    }

    #[test]
    fn classical_boundary() {
        let v = classical_boundary_v0(1.0);
        assert_abs_diff_eq!(v, FRAC_1_SQRT_2, epsilon = 1e-15);
        let w = apply_werner(&bell_phi_plus(), v).unwrap();
        assert_abs_diff_eq!(chsh_fixed_angles(&w), 2.0, epsilon = 1e-12);
    }

    #[test]
    fn correlation_tensor_of_rho3() {
        let t = correlation_matrix(&rho3(0.7, 0.4));
        let expected = Matrix3::from_diagonal(&nalgebra::Vector3::new(0.28, -0.28, 0.7));
        assert!((t - expected).abs().max() < 1e-14);
    }

    #[test]
    fn eta_estimator_examples() {
        let tight = 1e-4;
        let e = estimate_eta(
            Measured::new(0.8, tight),
            Measured::new(0.8, tight),
            Measured::new(SQRT_2 * 1.6, tight),
        )
        .unwrap();
        assert_abs_diff_eq!(e.combined.value, 1.0, epsilon = 1e-12);
        let e = estimate_eta(
            Measured::new(0.8, tight),
            Measured::new(0.4, tight),
            Measured::new(SQRT_2 * 1.2, tight),
        )
        .unwrap();
        assert_abs_diff_eq!(e.combined.value, 0.5, epsilon = 1e-12);
    }

    #[test]
    fn eta_estimator_on_table_row() {
        let (v0, v45, s) = (Measured::new(0.89, 0.04), Measured::new(0.76, 0.04), Measured::new(2.39, 0.08));
        let e = estimate_eta(v0, v45, s).unwrap();
        // Independent arithmetic of the same estimator.
        let ea = 0.76 / 0.89;
        let sa = ((0.04 / 0.89f64).powi(2) + (0.76 * 0.04 / (0.89f64 * 0.89)).powi(2)).sqrt();
        let eb = 2.39 / (SQRT_2 * 0.89) - 1.0;
        let sb = ((0.08 / (SQRT_2 * 0.89)).powi(2) + (2.39 * 0.04 / (SQRT_2 * 0.89 * 0.89)).powi(2)).sqrt();
        let w = (1.0 / (sa * sa), 1.0 / (sb * sb));
        let eta = (w.0 * ea + w.1 * eb) / (w.0 + w.1);
        assert_abs_diff_eq!(e.combined.value, eta, epsilon = 1e-12);
        assert_abs_diff_eq!(e.combined.sigma, (w.0 + w.1).sqrt().recip(), epsilon = 1e-12);
        assert!((e.combined.value - 0.88).abs() < 0.02);
        assert!((0.03..0.06).contains(&e.combined.sigma));
        let pull = (0.938 - e.combined.value) / (e.combined.sigma.powi(2) + 0.048f64.powi(2)).sqrt();
        assert!(pull.abs() < 1.5, "{pull}");
    }

    #[test]
    fn eta_estimator_rejects_zero_v0() {
        let m = Measured::new(0.0, 0.1);
        assert!(matches!(
            estimate_eta(m, Measured::new(0.1, 0.1), Measured::new(1.0, 0.1)),
            Err(Error::DegenerateInput(_))
        ));
    }

    #[test]
    fn state_validation() {
        let mut bad = *bell_phi_plus().matrix();
        bad[(0, 1)] = c(0.1);
        assert!(TwoQubitState::new(bad).is_err());
        let neg = DensityMatrix::from_diagonal(&nalgebra::Vector4::new(c(1.2), c(-0.2), c(0.0), c(0.0)));
        assert!(TwoQubitState::new(neg).is_err());
        let s = rho3(0.6, 0.3);
        assert_eq!(TwoQubitState::from_row_major(&s.to_row_major()).unwrap(), s);
    }

    fn random_state(rng: &mut ChaCha8Rng) -> TwoQubitState {
        let g = Matrix4::from_fn(|_, _| Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)));
        let m = g * g.adjoint();
        let tr = m.trace();
        let rho = m / tr;
        TwoQubitState::new((rho + rho.adjoint()) * c(0.5)).unwrap()
    }

    #[test]
    fn channels_preserve_state_invariants() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..100_000 {
            let s = random_state(&mut rng);
            let v0 = rng.random_range(0.0..=1.0);
            let eta = rng.random_range(0.0..=1.0);
            let out = apply_dephasing(&apply_werner(&s, v0).unwrap(), eta).unwrap();
            // Revalidate through the checked constructor.
            TwoQubitState::new(*out.matrix()).unwrap();
        }
    }

    #[test]
    fn dephasing_semigroup() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..2_000 {
            let s = random_state(&mut rng);
            let (e1, e2) = (rng.random_range(0.0..=1.0), rng.random_range(0.0..=1.0));
            let twice = apply_dephasing(&apply_dephasing(&s, e1).unwrap(), e2).unwrap();
            let once = apply_dephasing(&s, e1 * e2).unwrap();
            assert!((twice.matrix() - once.matrix()).iter().all(|z| z.norm() < 1e-12));
        }
    }

    #[test]
    fn optimal_bounds_fixed_on_random_states() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..5_000 {
            let s = random_state(&mut rng);
            assert!(chsh_optimal(&s) + 1e-12 >= chsh_fixed_angles(&s));
        }
    }

    #[test]
    fn measurement_setting_wraps_angles() {
        let s = MeasurementSetting::new(-PI / 2.0, 5.0 * PI);
        assert_abs_diff_eq!(s.alice(), 1.5 * PI, epsilon = 1e-12);
        assert_abs_diff_eq!(s.bob(), PI, epsilon = 1e-12);
        let d = MeasurementSetting::from_polarizer_degrees(45.0, 90.0);
        assert_abs_diff_eq!(d.alice(), DIAGONAL_BASIS, epsilon = 1e-12);
        assert_abs_diff_eq!(d.bob(), PI, epsilon = 1e-12);
    }

    #[test]
    fn marginals_of_rho3_are_half() {
        let s = rho3(0.7, 0.3);
        for a in [0.0, 0.4, PI] {
            assert_abs_diff_eq!(marginal_pass_probability(&s, Arm::Signal, a), 0.5, epsilon = 1e-15);
            assert_abs_diff_eq!(marginal_pass_probability(&s, Arm::Idler, a), 0.5, epsilon = 1e-15);
        }
    }
}
