//! Parameterized two-mode passive interferometers.
//!
//! A general element of U(2) is written as
//! `e^{iφ₀} [[e^{iφ_τ} cos ω, e^{iφ_ρ} sin ω], [−e^{−iφ_ρ} sin ω, e^{−iφ_τ} cos ω]]`
//! with `φ_τ = (φ+ψ)/2` and `φ_ρ = (φ−ψ)/2`. It factors as a global phase,
//! a `ψ` phase difference, a real rotation by `ω` and a `φ` phase difference.
//!
//! Phase space uses the quadrature ordering `(x₁, p₁, x₂, p₂)` throughout the
//! crate, with vacuum variance 1/2.

use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, PI, TAU};
use std::ops::Mul;

use nalgebra::{Matrix2, Matrix4};
use num_complex::Complex64;
use thiserror::Error;

/// Largest accepted unitarity defect for [`symplectic_from_unitary`].
pub const UNITARITY_TOLERANCE: f64 = 1e-10;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum InterferometerError {
    #[error("matrix is not unitary (max |U†U - 1| = {defect:e})")]
    NotUnitary { defect: f64 },
}

fn wrap_angle(x: f64) -> f64 {
    let w = x.rem_euclid(TAU);
    // rem_euclid can round up to exactly TAU for tiny negative inputs
    if w >= TAU {
        0.0
    } else {
        w
    }
}

/// The four interferometer parameters `(φ₀, φ, ψ, ω)`.
///
/// Values are canonical on construction: the three phases lie in `[0, 2π)`
/// and `ω` in `[0, π/2]`. Reducing `ω` can shift `φ` and `ψ` by `π` and flip
/// the overall sign of the matrix; the Fisher information is unaffected.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ParamVector {
    phi0: f64,
    phi: f64,
    psi: f64,
    omega: f64,
}

impl ParamVector {
    pub fn new(phi0: f64, phi: f64, psi: f64, omega: f64) -> Self {
        let mut phi = phi;
        let mut psi = psi;
        // U(ω + π) = −U(ω), so ω is first reduced modulo π
        let mut omega = omega.rem_euclid(PI);
        if omega >= PI {
            omega = 0.0;
        }
        if omega > FRAC_PI_2 {
            // cos(π − ω) = −cos ω only flips the diagonal: absorb it into φ_τ
            omega = PI - omega;
            phi += PI;
            psi += PI;
        }
        Self {
            phi0: wrap_angle(phi0),
            phi: wrap_angle(phi),
            psi: wrap_angle(psi),
            omega,
        }
    }

    pub fn from_array(values: [f64; 4]) -> Self {
        Self::new(values[0], values[1], values[2], values[3])
    }

    pub fn phi0(&self) -> f64 {
        self.phi0
    }

    pub fn phi(&self) -> f64 {
        self.phi
    }

    pub fn psi(&self) -> f64 {
        self.psi
    }

    pub fn omega(&self) -> f64 {
        self.omega
    }

    /// Transmittance `cos² ω`.
    pub fn transmittance(&self) -> f64 {
        self.omega.cos().powi(2)
    }

    /// Reflectance `sin² ω`.
    pub fn reflectance(&self) -> f64 {
        self.omega.sin().powi(2)
    }

    pub fn as_array(&self) -> [f64; 4] {
        [self.phi0, self.phi, self.psi, self.omega]
    }

    pub fn with_omega(&self, omega: f64) -> Self {
        Self::new(self.phi0, self.phi, self.psi, omega)
    }

    pub fn with_phi(&self, phi: f64) -> Self {
        Self::new(self.phi0, phi, self.psi, self.omega)
    }
}

impl Default for ParamVector {
    fn default() -> Self {
        Self::new(0.0, 0.0, 0.0, FRAC_PI_4)
    }
}

/// A 2×2 complex matrix acting on the mode operators `(a₁, a₂)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ComplexMatrix2(pub Matrix2<Complex64>);

impl ComplexMatrix2 {
    pub fn identity() -> Self {
        Self(Matrix2::identity())
    }

    pub fn from_rows(m00: Complex64, m01: Complex64, m10: Complex64, m11: Complex64) -> Self {
        Self(Matrix2::new(m00, m01, m10, m11))
    }

    pub fn diagonal(d0: Complex64, d1: Complex64) -> Self {
        Self::from_rows(d0, Complex64::new(0.0, 0.0), Complex64::new(0.0, 0.0), d1)
    }

    pub fn matrix(&self) -> &Matrix2<Complex64> {
        &self.0
    }

    pub fn get(&self, row: usize, col: usize) -> Complex64 {
        self.0[(row, col)]
    }

    pub fn adjoint(&self) -> Self {
        Self(self.0.adjoint())
    }

    pub fn determinant(&self) -> Complex64 {
        self.0.determinant()
    }

    pub fn scale(&self, factor: Complex64) -> Self {
        Self(self.0 * factor)
    }

    /// Largest elementwise modulus of `U†U − 1`.
    pub fn unitarity_defect(&self) -> f64 {
        let product = self.0.adjoint() * self.0 - Matrix2::identity();
        product.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        (self.0 - other.0).iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.0.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }
}

impl Mul for ComplexMatrix2 {
    type Output = ComplexMatrix2;

    fn mul(self, rhs: Self) -> Self {
        Self(self.0 * rhs.0)
    }
}

impl Mul for &ComplexMatrix2 {
    type Output = ComplexMatrix2;

    fn mul(self, rhs: Self) -> ComplexMatrix2 {
        ComplexMatrix2(self.0 * rhs.0)
    }
}

/// The standard symplectic form in `(x₁, p₁, x₂, p₂)` ordering.
pub fn symplectic_form() -> Matrix4<f64> {
    Matrix4::new(
        0.0, 1.0, 0.0, 0.0, //
        -1.0, 0.0, 0.0, 0.0, //
        0.0, 0.0, 0.0, 1.0, //
        0.0, 0.0, -1.0, 0.0,
    )
}

/// An orthogonal symplectic 4×4 matrix: the phase-space action of a
/// passive two-mode transformation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SymplecticRotation(Matrix4<f64>);

impl SymplecticRotation {
    pub fn identity() -> Self {
        Self(Matrix4::identity())
    }

    pub fn matrix(&self) -> &Matrix4<f64> {
        &self.0
    }

    /// Largest elementwise deviation of `RᵀR` from the identity.
    pub fn orthogonality_defect(&self) -> f64 {
        (self.0.transpose() * self.0 - Matrix4::identity()).amax()
    }

    /// Largest elementwise deviation of `RΩRᵀ` from `Ω`.
    pub fn symplectic_defect(&self) -> f64 {
        let omega = symplectic_form();
        (self.0 * omega * self.0.transpose() - omega).amax()
    }
}

impl Mul for SymplecticRotation {
    type Output = SymplecticRotation;

    fn mul(self, rhs: Self) -> Self {
        Self(self.0 * rhs.0)
    }
}

fn cis(angle: f64) -> Complex64 {
    Complex64::from_polar(1.0, angle)
}

/// Builds the U(2) matrix for `params`.
pub fn build_unitary(params: &ParamVector) -> ComplexMatrix2 {
    let (s, c) = params.omega.sin_cos();
    let phase_t = 0.5 * (params.phi + params.psi);
    let phase_r = 0.5 * (params.phi - params.psi);
    let u = ComplexMatrix2::from_rows(
        cis(phase_t) * c,
        cis(-phase_r) * s,
        -cis(phase_r) * s,
        cis(-phase_t) * c,
    );
    u.scale(cis(params.phi0))
}

/// The four factors `(F₀, F_ψ, F_ω, F_φ)` whose ordered product is
/// [`build_unitary`].
pub fn decompose_factors(params: &ParamVector) -> [ComplexMatrix2; 4] {
    let global = ComplexMatrix2::diagonal(cis(params.phi0), cis(params.phi0));
    let psi = ComplexMatrix2::diagonal(cis(0.5 * params.psi), cis(-0.5 * params.psi));
    let (s, c) = params.omega.sin_cos();
    let rotation = ComplexMatrix2::from_rows(c.into(), s.into(), (-s).into(), c.into());
    let phi = ComplexMatrix2::diagonal(cis(0.5 * params.phi), cis(-0.5 * params.phi));
    [global, psi, rotation, phi]
}

/// Analytic derivatives `∂U/∂θ` for `θ = φ₀, φ, ψ, ω`, in that order.
pub fn unitary_derivatives(params: &ParamVector) -> [ComplexMatrix2; 4] {
    let [global, psi, rotation, phi] = decompose_factors(params);
    let half_i = Complex64::new(0.0, 0.5);
    let sigma_z = ComplexMatrix2::diagonal(1.0.into(), (-1.0).into());
    let i_sz = sigma_z.scale(half_i);

    let u = global * psi * rotation * phi;
    let d_phi0 = u.scale(Complex64::i());
    let d_phi = global * psi * rotation * phi * i_sz;
    let d_psi = global * i_sz * psi * rotation * phi;
    let (s, c) = params.omega.sin_cos();
    let d_rotation = ComplexMatrix2::from_rows((-s).into(), c.into(), (-c).into(), (-s).into());
    let d_omega = global * psi * d_rotation * phi;
    [d_phi0, d_phi, d_psi, d_omega]
}

/// Real-linear lift of a complex 2×2 matrix to phase space, in
/// `(x₁, p₁, x₂, p₂)` ordering.
///
/// In the mode-block layout `(x₁, x₂, p₁, p₂)` the lift is
/// `[[Re M, −Im M], [Im M, Re M]]`; the permutation to the interleaved
/// ordering places `x_j` at `2j` and `p_j` at `2j + 1`.
pub fn phase_space_lift(m: &ComplexMatrix2) -> Matrix4<f64> {
    let mut out = Matrix4::zeros();
    for j in 0..2 {
        for k in 0..2 {
            let z = m.get(j, k);
            out[(2 * j, 2 * k)] = z.re;
            out[(2 * j, 2 * k + 1)] = -z.im;
            out[(2 * j + 1, 2 * k)] = z.im;
            out[(2 * j + 1, 2 * k + 1)] = z.re;
        }
    }
    out
}

/// Phase-space rotation of a unitary mode transformation.
pub fn symplectic_from_unitary(u: &ComplexMatrix2) -> Result<SymplecticRotation, InterferometerError> {
    let defect = u.unitarity_defect();
    if defect > UNITARITY_TOLERANCE {
        return Err(InterferometerError::NotUnitary { defect });
    }
    Ok(SymplecticRotation(phase_space_lift(u)))
}

/// Infallible variant for matrices built by this module.
pub(crate) fn rotation_of(u: &ComplexMatrix2) -> SymplecticRotation {
    SymplecticRotation(phase_space_lift(u))
}

/// The fixed balanced beam splitter `exp[π/4 (a₁†a₂ − a₁a₂†)]`, which acts on
/// the modes as `(1/√2) [[1, 1], [−1, 1]]`.
pub fn bs_unitary() -> ComplexMatrix2 {
    build_unitary(&ParamVector::new(0.0, 0.0, 0.0, FRAC_PI_4))
}
