//! Two-mode Gaussian states described by their first and second moments.
//!
//! Conventions: quadratures `x = (a + a†)/√2`, `p = (a − a†)/(i√2)`, so the
//! vacuum covariance is `I/2` and a coherent amplitude `α` sits at
//! `(x, p) = √2 (Re α, Im α)`.

use std::f64::consts::TAU;

use nalgebra::{Matrix2, Matrix4, SMatrix, SymmetricEigen, Vector4};
use thiserror::Error;

use crate::interferometer::{symplectic_form, SymplecticRotation};

pub const SYMMETRY_TOLERANCE: f64 = 1e-12;
pub const UNCERTAINTY_TOLERANCE: f64 = 1e-9;
pub const PURITY_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GaussianError {
    #[error("covariance matrix is not symmetric (defect {0:e})")]
    NotSymmetric(f64),
    #[error("`{name}` must be non-negative and finite, got {value}")]
    NegativeMagnitude { name: &'static str, value: f64 },
    #[error("`{name}` must lie in [0, 1], got {value}")]
    WeightOutOfRange { name: &'static str, value: f64 },
}

fn wrap_phase(x: f64) -> f64 {
    let w = x.rem_euclid(TAU);
    if w >= TAU {
        0.0
    } else {
        w
    }
}

fn check_magnitude(name: &'static str, value: f64) -> Result<f64, GaussianError> {
    if value.is_finite() && value >= 0.0 {
        Ok(value)
    } else {
        Err(GaussianError::NegativeMagnitude { name, value })
    }
}

fn check_weight(name: &'static str, value: f64) -> Result<f64, GaussianError> {
    if (0.0..=1.0).contains(&value) {
        Ok(value)
    } else {
        Err(GaussianError::WeightOutOfRange { name, value })
    }
}

/// First moments `d` and covariance `Γ` of a two-mode Gaussian state.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GaussianState {
    d: Vector4<f64>,
    gamma: Matrix4<f64>,
}

impl GaussianState {
    pub fn new(d: Vector4<f64>, gamma: Matrix4<f64>) -> Result<Self, GaussianError> {
        let defect = (gamma - gamma.transpose()).amax();
        if defect > SYMMETRY_TOLERANCE {
            return Err(GaussianError::NotSymmetric(defect));
        }
        Ok(Self { d, gamma })
    }

    pub fn vacuum() -> Self {
        Self {
            d: Vector4::zeros(),
            gamma: Matrix4::identity() * 0.5,
        }
    }

    pub fn d(&self) -> &Vector4<f64> {
        &self.d
    }

    pub fn gamma(&self) -> &Matrix4<f64> {
        &self.gamma
    }
}

/// Displaced two-mode squeezed probe `D₁(α₁) D₂(α₂) S₁₂(r e^{iθ}) |0,0⟩`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TmssProbe {
    r: f64,
    theta: f64,
    alpha1_mag: f64,
    alpha2_mag: f64,
    beta1: f64,
    beta2: f64,
}

impl TmssProbe {
    pub fn new(
        r: f64,
        theta: f64,
        alpha1_mag: f64,
        alpha2_mag: f64,
        beta1: f64,
        beta2: f64,
    ) -> Result<Self, GaussianError> {
        Ok(Self {
            r: check_magnitude("r", r)?,
            theta: wrap_phase(theta),
            alpha1_mag: check_magnitude("alpha1_mag", alpha1_mag)?,
            alpha2_mag: check_magnitude("alpha2_mag", alpha2_mag)?,
            beta1: wrap_phase(beta1),
            beta2: wrap_phase(beta2),
        })
    }

    /// Undisplaced two-mode squeezed vacuum.
    pub fn vacuum_squeezed(r: f64, theta: f64) -> Result<Self, GaussianError> {
        Self::new(r, theta, 0.0, 0.0, 0.0, 0.0)
    }

    pub fn r(&self) -> f64 {
        self.r
    }
    pub fn theta(&self) -> f64 {
        self.theta
    }
    pub fn alpha1_mag(&self) -> f64 {
        self.alpha1_mag
    }
    pub fn alpha2_mag(&self) -> f64 {
        self.alpha2_mag
    }
    pub fn beta1(&self) -> f64 {
        self.beta1
    }
    pub fn beta2(&self) -> f64 {
        self.beta2
    }

    /// Same squeezing, displacement removed.
    pub fn without_displacement(&self) -> Self {
        Self {
            alpha1_mag: 0.0,
            alpha2_mag: 0.0,
            ..*self
        }
    }

    /// `θ − β₁ − β₂` reduced to `[0, 2π)`.
    pub fn phase_mismatch(&self) -> f64 {
        wrap_phase(self.theta - self.beta1 - self.beta2)
    }
}

/// Product of two displaced single-mode squeezed states,
/// `D_i(α_i) S_i(r_i e^{2iθ_i}) |0⟩` on each mode.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SmssProbe {
    r1: f64,
    r2: f64,
    theta1: f64,
    theta2: f64,
    alpha1_mag: f64,
    alpha2_mag: f64,
    beta1: f64,
    beta2: f64,
}

impl SmssProbe {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        r1: f64,
        r2: f64,
        theta1: f64,
        theta2: f64,
        alpha1_mag: f64,
        alpha2_mag: f64,
        beta1: f64,
        beta2: f64,
    ) -> Result<Self, GaussianError> {
        Ok(Self {
            r1: check_magnitude("r1", r1)?,
            r2: check_magnitude("r2", r2)?,
            theta1: wrap_phase(theta1),
            theta2: wrap_phase(theta2),
            alpha1_mag: check_magnitude("alpha1_mag", alpha1_mag)?,
            alpha2_mag: check_magnitude("alpha2_mag", alpha2_mag)?,
            beta1: wrap_phase(beta1),
            beta2: wrap_phase(beta2),
        })
    }

    pub fn r1(&self) -> f64 {
        self.r1
    }
    pub fn r2(&self) -> f64 {
        self.r2
    }
    pub fn theta1(&self) -> f64 {
        self.theta1
    }
    pub fn theta2(&self) -> f64 {
        self.theta2
    }
    pub fn alpha1_mag(&self) -> f64 {
        self.alpha1_mag
    }
    pub fn alpha2_mag(&self) -> f64 {
        self.alpha2_mag
    }
    pub fn beta1(&self) -> f64 {
        self.beta1
    }
    pub fn beta2(&self) -> f64 {
        self.beta2
    }

    pub fn without_displacement(&self) -> Self {
        Self {
            alpha1_mag: 0.0,
            alpha2_mag: 0.0,
            ..*self
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Probe {
    Tmss(TmssProbe),
    Smss(SmssProbe),
}

impl Probe {
    pub fn state(&self) -> GaussianState {
        match self {
            Probe::Tmss(p) => tmss_state(p),
            Probe::Smss(p) => smss_state(p),
        }
    }

    pub fn without_displacement(&self) -> Self {
        match self {
            Probe::Tmss(p) => Probe::Tmss(p.without_displacement()),
            Probe::Smss(p) => Probe::Smss(p.without_displacement()),
        }
    }

    /// Complex displacement amplitudes `(α₁, α₂)`.
    pub fn displacements(&self) -> [(f64, f64); 2] {
        let (m1, b1, m2, b2) = match self {
            Probe::Tmss(p) => (p.alpha1_mag, p.beta1, p.alpha2_mag, p.beta2),
            Probe::Smss(p) => (p.alpha1_mag, p.beta1, p.alpha2_mag, p.beta2),
        };
        [(m1, b1), (m2, b2)]
    }
}

impl From<TmssProbe> for Probe {
    fn from(p: TmssProbe) -> Self {
        Probe::Tmss(p)
    }
}

impl From<SmssProbe> for Probe {
    fn from(p: SmssProbe) -> Self {
        Probe::Smss(p)
    }
}

/// Photon budget split between squeezing (`n_s`) and displacement (`n_c`).
///
/// `tau` is the fraction of displaced photons in mode 1
/// (`|α₁|² = τ N_c`); `eta` the fraction of squeezed photons in mode 1 for
/// the single-mode probe (`N_{s₁} = η N_s`).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ResourceBudget {
    n_s: f64,
    n_c: f64,
    tau: f64,
    eta: f64,
}

impl ResourceBudget {
    pub fn new(n_s: f64, n_c: f64, tau: f64, eta: f64) -> Result<Self, GaussianError> {
        Ok(Self {
            n_s: check_magnitude("n_s", n_s)?,
            n_c: check_magnitude("n_c", n_c)?,
            tau: check_weight("tau", tau)?,
            eta: check_weight("eta", eta)?,
        })
    }

    /// Total photon number `n` split evenly between squeezing and
    /// displacement, with balanced weights.
    pub fn balanced(n: f64) -> Result<Self, GaussianError> {
        Self::new(0.5 * n, 0.5 * n, 0.5, 0.5)
    }

    pub fn n_s(&self) -> f64 {
        self.n_s
    }
    pub fn n_c(&self) -> f64 {
        self.n_c
    }
    pub fn tau(&self) -> f64 {
        self.tau
    }
    pub fn eta(&self) -> f64 {
        self.eta
    }
    pub fn total(&self) -> f64 {
        self.n_s + self.n_c
    }

    pub fn with_tau(&self, tau: f64) -> Result<Self, GaussianError> {
        Self::new(self.n_s, self.n_c, tau, self.eta)
    }

    pub fn with_eta(&self, eta: f64) -> Result<Self, GaussianError> {
        Self::new(self.n_s, self.n_c, self.tau, eta)
    }

    fn displacement_magnitudes(&self) -> (f64, f64) {
        (
            (self.tau * self.n_c).sqrt(),
            ((1.0 - self.tau) * self.n_c).sqrt(),
        )
    }

    /// Two-mode squeezed probe with `2 sinh² r = N_s`.
    pub fn tmss_probe(&self, theta: f64, beta1: f64, beta2: f64) -> TmssProbe {
        let r = (0.5 * self.n_s).sqrt().asinh();
        let (a1, a2) = self.displacement_magnitudes();
        TmssProbe::new(r, theta, a1, a2, beta1, beta2).expect("budget values are validated")
    }

    /// Single-mode squeezed pair with `sinh² r₁ = η N_s`, `sinh² r₂ = (1−η) N_s`.
    pub fn smss_probe(&self, theta1: f64, theta2: f64, beta1: f64, beta2: f64) -> SmssProbe {
        let r1 = (self.eta * self.n_s).sqrt().asinh();
        let r2 = ((1.0 - self.eta) * self.n_s).sqrt().asinh();
        let (a1, a2) = self.displacement_magnitudes();
        SmssProbe::new(r1, r2, theta1, theta2, a1, a2, beta1, beta2)
            .expect("budget values are validated")
    }
}

fn displacement_vector(m1: f64, b1: f64, m2: f64, b2: f64) -> Vector4<f64> {
    let s = std::f64::consts::SQRT_2;
    Vector4::new(
        s * m1 * b1.cos(),
        s * m1 * b1.sin(),
        s * m2 * b2.cos(),
        s * m2 * b2.sin(),
    )
}

pub fn tmss_state(probe: &TmssProbe) -> GaussianState {
    let ch = (2.0 * probe.r).cosh();
    let sh = (2.0 * probe.r).sinh();
    let (st, ct) = probe.theta.sin_cos();
    let s_theta = Matrix2::new(ct, st, st, -ct);
    let mut gamma = Matrix4::zeros();
    gamma.fixed_view_mut::<2, 2>(0, 0).copy_from(&(Matrix2::identity() * ch));
    gamma.fixed_view_mut::<2, 2>(2, 2).copy_from(&(Matrix2::identity() * ch));
    gamma.fixed_view_mut::<2, 2>(0, 2).copy_from(&(s_theta * -sh));
    gamma.fixed_view_mut::<2, 2>(2, 0).copy_from(&(s_theta * -sh));
    GaussianState {
        d: displacement_vector(probe.alpha1_mag, probe.beta1, probe.alpha2_mag, probe.beta2),
        gamma: gamma * 0.5,
    }
}

/// Single-mode squeezed covariance: the quadrature along angle `θ` carries
/// variance `e^{−2r}/2`.
fn single_mode_covariance(r: f64, theta: f64) -> Matrix2<f64> {
    let (s, c) = theta.sin_cos();
    let rot = Matrix2::new(c, -s, s, c);
    let diag = Matrix2::new((-2.0 * r).exp(), 0.0, 0.0, (2.0 * r).exp());
    rot * diag * rot.transpose() * 0.5
}

pub fn smss_state(probe: &SmssProbe) -> GaussianState {
    let mut gamma = Matrix4::zeros();
    gamma
        .fixed_view_mut::<2, 2>(0, 0)
        .copy_from(&single_mode_covariance(probe.r1, probe.theta1));
    gamma
        .fixed_view_mut::<2, 2>(2, 2)
        .copy_from(&single_mode_covariance(probe.r2, probe.theta2));
    // rounding in the rotation can leave ~1e-17 asymmetry
    let gamma = (gamma + gamma.transpose()) * 0.5;
    GaussianState {
        d: displacement_vector(probe.alpha1_mag, probe.beta1, probe.alpha2_mag, probe.beta2),
        gamma,
    }
}

/// `(R d, R Γ Rᵀ)`.
pub fn evolve(state: &GaussianState, rotation: &SymplecticRotation) -> GaussianState {
    let r = rotation.matrix();
    let gamma = r * state.gamma * r.transpose();
    GaussianState {
        d: r * state.d,
        gamma: (gamma + gamma.transpose()) * 0.5,
    }
}

pub fn mean_photon_number(state: &GaussianState) -> f64 {
    0.5 * (state.gamma.trace() - 2.0) + 0.5 * state.d.norm_squared()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhysicalityReport {
    pub symmetry_defect: f64,
    /// Smallest eigenvalue of `Γ + (i/2)Ω`.
    pub min_uncertainty_eigenvalue: f64,
    /// Symplectic eigenvalues, ascending.
    pub symplectic_eigenvalues: [f64; 2],
    pub pure: bool,
}

impl PhysicalityReport {
    pub fn satisfies_uncertainty(&self) -> bool {
        self.min_uncertainty_eigenvalue >= -UNCERTAINTY_TOLERANCE
    }
}

/// Symplectic eigenvalues of a two-mode covariance, from the eigenvalues
/// `ν²` of the symmetric matrix `Γ^{1/2} Ω Γ Ωᵀ Γ^{1/2}`.
pub fn symplectic_eigenvalues(gamma: &Matrix4<f64>) -> [f64; 2] {
    let eig = gamma.symmetric_eigen();
    let roots = eig.eigenvalues.map(|v| v.max(0.0).sqrt());
    let sqrt_gamma = eig.eigenvectors * Matrix4::from_diagonal(&roots) * eig.eigenvectors.transpose();
    let omega = symplectic_form();
    let m = sqrt_gamma * omega * gamma * omega.transpose() * sqrt_gamma;
    let mut nu2: Vec<f64> = (0.5 * (m + m.transpose())).symmetric_eigenvalues().iter().copied().collect();
    nu2.sort_by(f64::total_cmp);
    [0.5 * (nu2[0] + nu2[1]), 0.5 * (nu2[2] + nu2[3])].map(|v| v.max(0.0).sqrt())
}

pub fn check_physical(state: &GaussianState) -> PhysicalityReport {
    let gamma = state.gamma;
    let symmetry_defect = (gamma - gamma.transpose()).amax();
    // Hermitian Γ + (i/2)Ω as the real symmetric block [[Γ, −Ω/2], [Ω/2, Γ]]
    let half_omega = symplectic_form() * 0.5;
    let sym = (gamma + gamma.transpose()) * 0.5;
    let mut embedded = SMatrix::<f64, 8, 8>::zeros();
    embedded.fixed_view_mut::<4, 4>(0, 0).copy_from(&sym);
    embedded.fixed_view_mut::<4, 4>(4, 4).copy_from(&sym);
    embedded.fixed_view_mut::<4, 4>(0, 4).copy_from(&(-half_omega));
    embedded.fixed_view_mut::<4, 4>(4, 0).copy_from(&half_omega);
    let eig = SymmetricEigen::new(embedded);
    let min_uncertainty_eigenvalue = eig.eigenvalues.min();
    let nu = symplectic_eigenvalues(&sym);
    let pure = nu.iter().all(|v| (v - 0.5).abs() <= PURITY_TOLERANCE);
    PhysicalityReport {
        symmetry_defect,
        min_uncertainty_eigenvalue,
        symplectic_eigenvalues: nu,
        pure,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::interferometer::{build_unitary, bs_unitary, symplectic_from_unitary, ParamVector};
    use approx::assert_abs_diff_eq;
    use std::f64::consts::FRAC_PI_2;

    #[test]
    fn vacuum_probes() {
        let t = tmss_state(&TmssProbe::vacuum_squeezed(0.0, 0.0).unwrap());
        assert_eq!(t, GaussianState::vacuum());
        let s = smss_state(&SmssProbe::new(0.0, 0.0, 0.3, 1.2, 0.0, 0.0, 0.0, 0.0).unwrap());
        assert!((s.gamma() - Matrix4::identity() * 0.5).amax() < 1e-16);
        let report = check_physical(&GaussianState::vacuum());
        assert!(report.pure);
        assert_abs_diff_eq!(report.symplectic_eigenvalues[0], 0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(report.symplectic_eigenvalues[1], 0.5, epsilon = 1e-15);
        assert_eq!(mean_photon_number(&GaussianState::vacuum()), 0.0);
    }

    #[test]
    fn tmss_blocks_use_double_angle() {
        let g = *tmss_state(&TmssProbe::vacuum_squeezed(0.5, 0.0).unwrap()).gamma();
        assert_abs_diff_eq!(g[(0, 0)], 1f64.cosh() / 2.0, epsilon = 1e-15);
        assert_abs_diff_eq!(g[(0, 2)], -1f64.sinh() / 2.0, epsilon = 1e-15);
        assert_abs_diff_eq!(g[(1, 3)], 1f64.sinh() / 2.0, epsilon = 1e-15);
        assert_eq!(g[(0, 1)], 0.0);
    }

    #[test]
    fn tmss_photon_number() {
        let s = tmss_state(&TmssProbe::vacuum_squeezed(0.5, 1.0).unwrap());
        assert_abs_diff_eq!(mean_photon_number(&s), 2.0 * 0.5f64.sinh().powi(2), epsilon = 1e-14);
        let displaced = tmss_state(&TmssProbe::new(0.5, 1.0, 0.3, 0.7, 2.0, 4.0).unwrap());
        let expected = 2.0 * 0.5f64.sinh().powi(2) + 0.09 + 0.49;
        assert_abs_diff_eq!(mean_photon_number(&displaced), expected, epsilon = 1e-14);
    }

    #[test]
    fn smss_reduces_to_diagonal_layout() {
        let (r1, r2) = (0.4, 0.9);
        let s = smss_state(&SmssProbe::new(r1, r2, FRAC_PI_2, 0.0, 0.0, 0.0, 0.0, 0.0).unwrap());
        let expected = Matrix4::from_diagonal(&Vector4::new(
            (2.0 * r1).exp(),
            (-2.0 * r1).exp(),
            (-2.0 * r2).exp(),
            (2.0 * r2).exp(),
        )) * 0.5;
        assert!((s.gamma() - expected).amax() < 1e-15);
        let n = r1.sinh().powi(2) + r2.sinh().powi(2);
        assert_abs_diff_eq!(mean_photon_number(&s), n, epsilon = 1e-14);
    }

    #[test]
    fn below_vacuum_noise_is_flagged() {
        let state = GaussianState::new(Vector4::zeros(), Matrix4::identity() * 0.25).unwrap();
        let report = check_physical(&state);
        assert!(!report.satisfies_uncertainty());
        assert!(!report.pure);
    }

    #[test]
    fn asymmetric_covariance_rejected() {
        let mut g = Matrix4::identity() * 0.5;
        g[(0, 1)] = 0.1;
        assert!(matches!(
            GaussianState::new(Vector4::zeros(), g),
            Err(GaussianError::NotSymmetric(_))
        ));
    }

    #[test]
    fn invalid_probe_fields_rejected() {
        assert!(TmssProbe::new(-0.1, 0.0, 0.0, 0.0, 0.0, 0.0).is_err());
        assert!(SmssProbe::new(0.1, 0.1, 0.0, 0.0, -1.0, 0.0, 0.0, 0.0).is_err());
        assert!(ResourceBudget::new(1.0, 1.0, 1.5, 0.5).is_err());
    }

    #[test]
    fn evolved_tmss_matches_explicit_entries() {
        let r: f64 = 0.5;
        let theta: f64 = 0.0;
        let p = ParamVector::new(0.3, 1.1, 0.7, 0.4);
        let rot = symplectic_from_unitary(&build_unitary(&p)).unwrap();
        let g = *evolve(&tmss_state(&TmssProbe::vacuum_squeezed(r, theta).unwrap()), &rot).gamma();
        let (ch, sh) = ((2.0 * r).cosh(), (2.0 * r).sinh());
        let (s2w, c2w) = (2.0 * p.omega()).sin_cos();
        let a = theta + p.psi() + 2.0 * p.phi0();
        let b = theta + 2.0 * p.phi0();
        let c = theta - p.psi() + 2.0 * p.phi0();
        let explicit = Matrix4::new(
            ch - s2w * sh * a.cos(),
            -c2w * sh * b.cos(),
            -s2w * sh * a.sin(),
            -c2w * sh * b.sin(),
            -c2w * sh * b.cos(),
            ch + s2w * sh * c.cos(),
            -c2w * sh * b.sin(),
            s2w * sh * c.sin(),
            -s2w * sh * a.sin(),
            -c2w * sh * b.sin(),
            ch + s2w * sh * a.cos(),
            c2w * sh * b.cos(),
            -c2w * sh * b.sin(),
            s2w * sh * c.sin(),
            c2w * sh * b.cos(),
            ch - s2w * sh * c.cos(),
        ) * 0.5;
        // explicit entries are laid out as (x₁, x₂, p₁, p₂)
        let order = [0, 2, 1, 3];
        let explicit = Matrix4::from_fn(|i, j| explicit[(order[i], order[j])]);
        assert!((g - explicit).amax() < 1e-14, "{g}\n{explicit}");
    }

    #[test]
    fn beam_splitter_mixes_coherent_means() {
        let probe = TmssProbe::new(0.0, 0.0, 0.8, 0.0, 0.0, 0.0).unwrap();
        let rot = symplectic_from_unitary(&bs_unitary()).unwrap();
        let out = evolve(&tmss_state(&probe), &rot);
        let x = std::f64::consts::SQRT_2 * 0.8;
        assert_abs_diff_eq!(out.d()[0], x / 2f64.sqrt(), epsilon = 1e-15);
        assert_abs_diff_eq!(out.d()[2], -x / 2f64.sqrt(), epsilon = 1e-15);
    }

    #[test]
    fn beam_splitter_turns_smss_into_tmss() {
        for r in [0.2, 0.5, 1.0] {
            let smss = smss_state(&SmssProbe::new(r, r, FRAC_PI_2, 0.0, 0.0, 0.0, 0.0, 0.0).unwrap());
            let rot = symplectic_from_unitary(&bs_unitary()).unwrap();
            let mixed = evolve(&smss, &rot);
            let tmss = tmss_state(&TmssProbe::vacuum_squeezed(r, 0.0).unwrap());
            assert!((mixed.gamma() - tmss.gamma()).amax() < 1e-14);
        }
    }
}
