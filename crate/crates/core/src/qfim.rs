//! Quantum Fisher information matrices of Gaussian probes and the
//! resulting Cramér–Rao bounds.
//!
//! Parameter order is always `(φ₀, φ, ψ, ω)`.

use nalgebra::{Cholesky, Matrix4, SymmetricEigen, Vector4};
use thiserror::Error;

use crate::gaussian::{GaussianState, Probe, SmssProbe, TmssProbe};
use crate::interferometer::{
    build_unitary, phase_space_lift, rotation_of, unitary_derivatives, ComplexMatrix2, ParamVector,
};

/// Largest accepted condition number for `Γ_U` and for an invertible QFIM.
pub const CONDITION_THRESHOLD: f64 = 1e12;
/// Relative singular-value cutoff of the pseudo-inverse.
pub const PSEUDO_INVERSE_CUTOFF: f64 = 1e-10;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum QfimError {
    #[error("covariance matrix is ill-conditioned (condition number {0:e})")]
    IllConditioned(f64),
    #[error("omega = {0} lies on the boundary of (0, pi/2)")]
    DegenerateOmega(f64),
}

/// A QFIM with its displacement and covariance summands.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Qfim {
    h_d: Matrix4<f64>,
    h_gamma: Matrix4<f64>,
    total: Matrix4<f64>,
}

impl Qfim {
    pub fn new(h_d: Matrix4<f64>, h_gamma: Matrix4<f64>) -> Self {
        Self {
            h_d,
            h_gamma,
            total: h_d + h_gamma,
        }
    }

    pub fn h_d(&self) -> &Matrix4<f64> {
        &self.h_d
    }

    pub fn h_gamma(&self) -> &Matrix4<f64> {
        &self.h_gamma
    }

    pub fn total(&self) -> &Matrix4<f64> {
        &self.total
    }

    pub fn bounds(&self) -> BoundsReport {
        qcrb_bounds(&self.total)
    }
}

/// Derivatives of the evolved moments with respect to each parameter.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MomentDerivatives {
    pub evolved: GaussianState,
    pub d: [Vector4<f64>; 4],
    pub gamma: [Matrix4<f64>; 4],
}

/// Moment derivatives of `state` sent through `U(params) · input`.
///
/// `input` is a fixed unitary applied before the parameterized one; pass the
/// identity for the plain interferometer.
pub fn moment_derivatives_through(
    state: &GaussianState,
    params: &ParamVector,
    input: &ComplexMatrix2,
) -> MomentDerivatives {
    let u = build_unitary(params) * *input;
    let r = *rotation_of(&u).matrix();
    let d0 = state.d();
    let g0 = state.gamma();
    let derivs = unitary_derivatives(params);
    let mut d = [Vector4::zeros(); 4];
    let mut gamma = [Matrix4::zeros(); 4];
    for k in 0..4 {
        let dr = phase_space_lift(&(derivs[k] * *input));
        d[k] = dr * d0;
        let half = dr * g0 * r.transpose();
        gamma[k] = half + half.transpose();
    }
    let evolved = GaussianState::new(r * d0, {
        let g = r * g0 * r.transpose();
        (g + g.transpose()) * 0.5
    })
    .expect("symmetrized covariance");
    MomentDerivatives { evolved, d, gamma }
}

pub fn moment_derivatives(state: &GaussianState, params: &ParamVector) -> MomentDerivatives {
    moment_derivatives_through(state, params, &ComplexMatrix2::identity())
}

fn symmetrize(m: Matrix4<f64>) -> Matrix4<f64> {
    (m + m.transpose()) * 0.5
}

fn spd_inverse(m: &Matrix4<f64>) -> Result<Matrix4<f64>, QfimError> {
    let eig = SymmetricEigen::new(*m);
    let max = eig.eigenvalues.max();
    let min = eig.eigenvalues.min();
    let condition = if min > 0.0 { max / min } else { f64::INFINITY };
    if condition > CONDITION_THRESHOLD {
        return Err(QfimError::IllConditioned(condition));
    }
    Cholesky::new(*m)
        .map(|c| c.inverse())
        .ok_or(QfimError::IllConditioned(condition))
}

/// QFIM of `state` evolving through `U(params) · input`.
pub fn qfim_through(
    state: &GaussianState,
    params: &ParamVector,
    input: &ComplexMatrix2,
) -> Result<Qfim, QfimError> {
    let md = moment_derivatives_through(state, params, input);
    let inv = spd_inverse(md.evolved.gamma())?;
    let a: Vec<Matrix4<f64>> = md.gamma.iter().map(|g| inv * g).collect();
    let mut h_d = Matrix4::zeros();
    let mut h_gamma = Matrix4::zeros();
    for m in 0..4 {
        for n in m..4 {
            let hd = md.d[m].dot(&(inv * md.d[n]));
            let hg = 0.5 * (a[m] * a[n]).trace();
            h_d[(m, n)] = hd;
            h_d[(n, m)] = hd;
            h_gamma[(m, n)] = hg;
            h_gamma[(n, m)] = hg;
        }
    }
    Ok(Qfim::new(h_d, h_gamma))
}

pub fn qfim_from_state(state: &GaussianState, params: &ParamVector) -> Result<Qfim, QfimError> {
    qfim_through(state, params, &ComplexMatrix2::identity())
}

pub fn qfim_numeric(probe: &Probe, params: &ParamVector) -> Result<Qfim, QfimError> {
    qfim_from_state(&probe.state(), params)
}

/// Per-parameter Cramér–Rao bounds `(H⁻¹)_kk` and the scalar bound `Tr H⁻¹`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundsReport {
    pub per_param: [f64; 4],
    pub scalar_bound: f64,
    pub condition_number: f64,
    pub singular: bool,
    /// Eigenvalues of `H`, ascending.
    pub eigenvalues: [f64; 4],
    /// `H⁻¹`, or the pseudo-inverse when singular.
    pub inverse: Matrix4<f64>,
}

pub fn qcrb_bounds(h: &Matrix4<f64>) -> BoundsReport {
    let h = symmetrize(*h);
    let eig = SymmetricEigen::new(h);
    let mut eigenvalues: [f64; 4] = eig.eigenvalues.into();
    eigenvalues.sort_by(f64::total_cmp);
    let largest = eigenvalues.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    let condition_number = if eigenvalues[0] > 0.0 {
        largest / eigenvalues[0]
    } else {
        f64::INFINITY
    };
    if condition_number <= CONDITION_THRESHOLD {
        if let Some(chol) = Cholesky::new(h) {
            let inverse = symmetrize(chol.inverse());
            let per_param = [inverse[(0, 0)], inverse[(1, 1)], inverse[(2, 2)], inverse[(3, 3)]];
            return BoundsReport {
                per_param,
                scalar_bound: per_param.iter().sum(),
                condition_number,
                singular: false,
                eigenvalues,
                inverse,
            };
        }
    }
    let svd = h.svd(true, true);
    let max_sv = svd.singular_values.max();
    let cutoff = PSEUDO_INVERSE_CUTOFF * max_sv;
    let inverse = if max_sv > 0.0 {
        symmetrize(svd.pseudo_inverse(cutoff).expect("both factors computed"))
    } else {
        Matrix4::zeros()
    };
    // a parameter is identifiable only if its axis lies in the range of H
    let v_t = svd.v_t.expect("computed");
    let mut per_param = [0.0; 4];
    for (k, slot) in per_param.iter_mut().enumerate() {
        let null_weight: f64 = (0..4)
            .filter(|&i| svd.singular_values[i] <= cutoff)
            .map(|i| v_t[(i, k)].powi(2))
            .sum();
        *slot = if null_weight > 1e-8 {
            f64::INFINITY
        } else {
            inverse[(k, k)]
        };
    }
    BoundsReport {
        per_param,
        scalar_bound: f64::INFINITY,
        condition_number,
        singular: true,
        eigenvalues,
        inverse,
    }
}

/// Scalar bound `(1/N²)(1 + 1/(sin²ω cos²ω))` for balanced TMSS probes.
pub fn scalar_bound_closed_form(n: f64, omega: f64) -> Result<f64, QfimError> {
    let sc = omega.sin() * omega.cos();
    if !(omega > 0.0 && omega < std::f64::consts::FRAC_PI_2) || sc.abs() < 1e-300 {
        return Err(QfimError::DegenerateOmega(omega));
    }
    Ok((1.0 + 1.0 / (sc * sc)) / (n * n))
}

pub fn closed_form_hgamma_tmss(r: f64, omega: f64) -> Matrix4<f64> {
    let s = (2.0 * r).sinh().powi(2);
    let w = (2.0 * omega).sin().powi(2);
    Matrix4::from_diagonal(&Vector4::new(8.0 * s, 0.0, 2.0 * s * w, 8.0 * s))
}

fn mirror(mut h: Matrix4<f64>) -> Matrix4<f64> {
    for i in 0..4 {
        for j in 0..i {
            h[(i, j)] = h[(j, i)];
        }
    }
    h
}

fn hd_tmss_entries(probe: &TmssProbe, params: &ParamVector, psi_sign: f64) -> Matrix4<f64> {
    let (a1, a2) = (probe.alpha1_mag(), probe.alpha2_mag());
    let (a1s, a2s) = (a1 * a1, a2 * a2);
    let (th, b1, b2) = (probe.theta(), probe.beta1(), probe.beta2());
    let (f, w) = (params.phi(), params.omega());
    let (c, s) = ((2.0 * probe.r()).cosh(), (2.0 * probe.r()).sinh());
    let m = (th - b1 - b2).cos();
    let (s2w, c2w) = (2.0 * w).sin_cos();
    let (s4w, c4w) = (4.0 * w).sin_cos();
    let k1 = th - f - 2.0 * b1;
    let k2 = th + f - 2.0 * b2;
    let mut h = Matrix4::zeros();
    h[(0, 0)] = 4.0 * (a1s + a2s) * c - 8.0 * a1 * a2 * s * m;
    h[(0, 1)] = 2.0 * (a1s - a2s) * c;
    h[(0, 2)] = 2.0 * (a1s - a2s) * c * c2w
        - 2.0 * s2w * (-2.0 * a1 * a2 * (f + b1 - b2).cos() * c + (a1s * k1.cos() + a2s * k2.cos()) * s);
    h[(0, 3)] = -8.0 * a1 * a2 * c * (f + b1 - b2).sin() + 4.0 * (-a1s * k1.sin() + a2s * k2.sin()) * s;
    h[(1, 1)] = (a1s + a2s) * c + 2.0 * a1 * a2 * s * m;
    h[(1, 2)] = (a1s + a2s) * c2w * c
        + (2.0 * a1 * a2 * c2w * m + (-a1s * k1.cos() + a2s * k2.cos()) * s2w) * s;
    h[(1, 3)] = -2.0 * (a1s * k1.sin() + a2s * k2.sin()) * s;
    h[(2, 2)] = (a1s + a2s) * c
        + s * (psi_sign * s4w * (a1s * k1.cos() - a2s * k2.cos()) + 2.0 * a1 * a2 * c4w * m);
    h[(2, 3)] = -2.0 * c2w * (a1s * k1.sin() + a2s * k2.sin()) * s;
    h[(3, 3)] = 4.0 * (a1s + a2s) * c - 8.0 * a1 * a2 * s * m;
    mirror(h)
}

/// Closed-form displacement QFIM of a TMSS probe for arbitrary phases.
pub fn closed_form_hd_tmss(probe: &TmssProbe, params: &ParamVector) -> Matrix4<f64> {
    hd_tmss_entries(probe, params, -1.0)
}

/// The same table with the opposite sign on the `sin 4ω` term of `H₃₃`.
/// Kept for comparison; it does not agree with the moment calculation.
pub fn closed_form_hd_tmss_flipped_psi_term(probe: &TmssProbe, params: &ParamVector) -> Matrix4<f64> {
    hd_tmss_entries(probe, params, 1.0)
}

/// Covariance QFIM of two equally squeezed single-mode states with
/// squeezing phases `(π/2, 0)`.
pub fn closed_form_hgamma_smss(r: f64, omega: f64, phi: f64) -> Matrix4<f64> {
    let s = (2.0 * r).sinh().powi(2);
    let (s2w, c2w) = (2.0 * omega).sin_cos();
    let mut h = Matrix4::zeros();
    h[(0, 0)] = 8.0 * s;
    h[(1, 1)] = (4.0 * r).cosh() - 1.0;
    h[(1, 2)] = 2.0 * s * c2w;
    h[(2, 2)] = 0.5 * s * ((4.0 * omega).cos() - 2.0 * s2w * s2w * (2.0 * phi).cos() + 3.0);
    h[(2, 3)] = 2.0 * s * s2w * (2.0 * phi).sin();
    h[(3, 3)] = 8.0 * s * phi.cos().powi(2);
    mirror(h)
}

/// Covariance QFIM of two single-mode squeezed states with squeezing
/// magnitudes `(r₁, r₂)` and phases `(π/2, 0)`.
pub fn closed_form_hgamma_smss_general(r1: f64, r2: f64, omega: f64, phi: f64) -> Matrix4<f64> {
    let (c1, c2) = ((4.0 * r1).cosh(), (4.0 * r2).cosh());
    let (s2w, c2w) = (2.0 * omega).sin_cos();
    let (sh1, sh2) = ((2.0 * r1).sinh(), (2.0 * r2).sinh());
    let mut h = Matrix4::zeros();
    h[(0, 0)] = 2.0 * (c1 + c2 - 2.0);
    h[(0, 1)] = c1 - c2;
    h[(0, 2)] = c2w * (c1 - c2);
    h[(1, 1)] = 0.5 * (c1 + c2 - 2.0);
    h[(1, 2)] = 0.5 * c2w * (c1 + c2 - 2.0);
    h[(2, 2)] = 0.25
        * (-4.0
            + (1.0 + (4.0 * omega).cos()) * (c1 + c2)
            + 4.0 * s2w * s2w * ((2.0 * r1).cosh() * (2.0 * r2).cosh() - (2.0 * phi).cos() * sh1 * sh2));
    h[(2, 3)] = 2.0 * s2w * sh1 * sh2 * (2.0 * phi).sin();
    h[(3, 3)] = 2.0
        * ((2.0 * (r1 - r2)).cosh() + (2.0 * (r1 + r2)).cosh() - 2.0
            + 2.0 * sh1 * sh2 * (2.0 * phi).cos());
    mirror(h)
}

/// Weight of the `φ` sector in the leading-order TMSS QFIM: `N_c N_s`
/// (`Single`) or `2 N_c N_s` (`Double`). The moment calculation supports
/// `Double`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum PhiSectorWeight {
    Single,
    Double,
}

impl PhiSectorWeight {
    fn factor(self) -> f64 {
        match self {
            PhiSectorWeight::Single => 1.0,
            PhiSectorWeight::Double => 2.0,
        }
    }
}

/// Leading `O(N²)` QFIM of a phase-matched, balanced TMSS probe.
pub fn asymptotic_qfim_tmss(n_s: f64, n_c: f64, omega: f64, weight: PhiSectorWeight) -> Matrix4<f64> {
    let k = weight.factor() * n_c * n_s;
    let (s2w, c2w) = (2.0 * omega).sin_cos();
    let mut h = Matrix4::zeros();
    h[(0, 0)] = 8.0 * n_s * n_s;
    h[(1, 1)] = k;
    h[(1, 2)] = k * c2w;
    h[(2, 2)] = 2.0 * n_s * n_s * s2w * s2w + k * c2w * c2w;
    h[(3, 3)] = 8.0 * n_s * n_s;
    mirror(h)
}

/// Closed-form diagonal of the inverse of [`asymptotic_qfim_tmss`].
pub fn asymptotic_bounds_tmss(n_s: f64, n_c: f64, omega: f64, weight: PhiSectorWeight) -> [f64; 4] {
    let s2w = (2.0 * omega).sin();
    let cot2 = (2.0 * omega).cos().powi(2) / (s2w * s2w);
    let ratio = match weight {
        PhiSectorWeight::Single => 2.0 * n_s / n_c,
        PhiSectorWeight::Double => n_s / n_c,
    };
    let ns2 = n_s * n_s;
    [
        1.0 / (8.0 * ns2),
        (ratio + cot2) / (2.0 * ns2),
        1.0 / (2.0 * ns2 * s2w * s2w),
        1.0 / (8.0 * ns2),
    ]
}

/// Leading `O(N²)` QFIM of a balanced SMSS probe with squeezing phases
/// `(π/2, 0)` through the plain interferometer.
pub fn asymptotic_qfim_smss(n_s: f64, n_c: f64, omega: f64, phi: f64) -> Matrix4<f64> {
    let (s2w, c2w) = (2.0 * omega).sin_cos();
    let (s2f, c2f) = (2.0 * phi).sin_cos();
    let mut h = Matrix4::zeros();
    h[(0, 0)] = 8.0 * n_s * n_s;
    h[(1, 1)] = 2.0 * n_s * n_s;
    h[(1, 2)] = 2.0 * n_s * n_s * c2w;
    h[(2, 2)] = 0.5
        * n_s
        * (2.0 * s2w * s2w * ((n_c - n_s) * c2f + n_c) + n_s * ((4.0 * omega).cos() + 3.0));
    h[(2, 3)] = 2.0 * n_s * (n_s - n_c) * s2w * s2f;
    h[(3, 3)] = 8.0 * n_s * (n_c * phi.sin().powi(2) + n_s * phi.cos().powi(2));
    mirror(h)
}

/// Closed-form diagonal of the inverse of [`asymptotic_qfim_smss`].
pub fn asymptotic_bounds_smss(n_s: f64, n_c: f64, omega: f64, phi: f64) -> [f64; 4] {
    let s2w2 = (2.0 * omega).sin().powi(2);
    let c2w2 = (2.0 * omega).cos().powi(2);
    let c2f = (2.0 * phi).cos();
    let ns2 = n_s * n_s;
    [
        1.0 / (8.0 * ns2),
        (3.0 * n_c + n_s - (n_c - n_s) * ((4.0 * omega).cos() + 2.0 * c2w2 * c2f))
            / (8.0 * n_c * ns2 * s2w2),
        (n_s * phi.cos().powi(2) + n_c * phi.sin().powi(2)) / (2.0 * n_c * ns2 * s2w2),
        ((n_c - n_s) * c2f + n_c + n_s) / (16.0 * n_c * ns2),
    ]
}

/// Convenience: QFIM of an SMSS probe through `U(params) · U_BS`.
pub fn qfim_smss_through_bs(probe: &SmssProbe, params: &ParamVector) -> Result<Qfim, QfimError> {
    qfim_through(
        &crate::gaussian::smss_state(probe),
        params,
        &crate::interferometer::bs_unitary(),
    )
}
