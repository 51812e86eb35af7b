//! Truncated two-mode Fock space: probe preparation by matrix
//! exponentials, Schwinger generators, and the generator-covariance QFIM.
//!
//! Basis index of `|n₁, n₂⟩` is `n₁ (c + 1) + n₂` for cutoff `c`.

use nalgebra::{DMatrix, Matrix4, Vector4};
use num_complex::Complex64;
use thiserror::Error;

use crate::gaussian::{Probe, SmssProbe, TmssProbe};
use crate::interferometer::ParamVector;

pub const DEFAULT_MAX_CUTOFF: usize = 60;
/// Largest tolerated probability mass outside the cutoff box.
pub const MAX_NORM_DEFECT: f64 = 1e-4;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FockError {
    #[error("cutoff must be at least 1")]
    ZeroCutoff,
    #[error("cutoff {cutoff} loses {defect:e} of the norm")]
    CutoffTooSmall { cutoff: usize, defect: f64 },
    #[error("no cutoff up to {max} reaches norm defect below {tol:e}")]
    CutoffExceeded { max: usize, tol: f64 },
}

type C = Complex64;

fn c(re: f64, im: f64) -> C {
    C::new(re, im)
}

/// Row-compressed operator on the two-mode box.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseOperator {
    dim: usize,
    rows: Vec<Vec<(usize, C)>>,
}

impl SparseOperator {
    pub fn zeros(dim: usize) -> Self {
        Self {
            dim,
            rows: vec![Vec::new(); dim],
        }
    }

    pub fn identity(dim: usize) -> Self {
        Self {
            dim,
            rows: (0..dim).map(|i| vec![(i, c(1.0, 0.0))]).collect(),
        }
    }

    fn from_triplets(dim: usize, triplets: impl IntoIterator<Item = (usize, usize, C)>) -> Self {
        let mut op = Self::zeros(dim);
        for (i, j, v) in triplets {
            op.push(i, j, v);
        }
        op.compact();
        op
    }

    fn push(&mut self, i: usize, j: usize, v: C) {
        self.rows[i].push((j, v));
    }

    fn compact(&mut self) {
        for row in &mut self.rows {
            row.sort_by_key(|&(j, _)| j);
            let mut merged: Vec<(usize, C)> = Vec::with_capacity(row.len());
            for &(j, v) in row.iter() {
                match merged.last_mut() {
                    Some((k, acc)) if *k == j => *acc += v,
                    _ => merged.push((j, v)),
                }
            }
            merged.retain(|&(_, v)| v.norm() > 0.0);
            *row = merged;
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn get(&self, i: usize, j: usize) -> C {
        self.rows[i]
            .iter()
            .find(|&&(k, _)| k == j)
            .map(|&(_, v)| v)
            .unwrap_or_default()
    }

    pub fn apply(&self, v: &[C]) -> Vec<C> {
        self.rows
            .iter()
            .map(|row| row.iter().map(|&(j, a)| a * v[j]).sum())
            .collect()
    }

    pub fn adjoint(&self) -> Self {
        Self::from_triplets(
            self.dim,
            self.rows
                .iter()
                .enumerate()
                .flat_map(|(i, row)| row.iter().map(move |&(j, v)| (j, i, v.conj()))),
        )
    }

    pub fn scale(&self, factor: C) -> Self {
        Self {
            dim: self.dim,
            rows: self
                .rows
                .iter()
                .map(|row| row.iter().map(|&(j, v)| (j, v * factor)).collect())
                .collect(),
        }
    }

    pub fn add(&self, other: &Self) -> Self {
        let mut out = self.clone();
        for (i, row) in other.rows.iter().enumerate() {
            out.rows[i].extend_from_slice(row);
        }
        out.compact();
        out
    }

    /// `self · other`.
    pub fn compose(&self, other: &Self) -> Self {
        let mut out = Self::zeros(self.dim);
        for (i, row) in self.rows.iter().enumerate() {
            for &(k, a) in row {
                for &(j, b) in &other.rows[k] {
                    out.push(i, j, a * b);
                }
            }
        }
        out.compact();
        out
    }

    /// Largest elementwise modulus of `A − A†`.
    pub fn hermiticity_defect(&self) -> f64 {
        let adj = self.adjoint();
        let diff = self.add(&adj.scale(c(-1.0, 0.0)));
        diff.rows
            .iter()
            .flat_map(|row| row.iter().map(|&(_, v)| v.norm()))
            .fold(0.0, f64::max)
    }

    pub fn to_dense(&self) -> DMatrix<C> {
        let mut m = DMatrix::zeros(self.dim, self.dim);
        for (i, row) in self.rows.iter().enumerate() {
            for &(j, v) in row {
                m[(i, j)] = v;
            }
        }
        m
    }
}

/// Mode operators and Schwinger operators on the box `n₁, n₂ ≤ cutoff`.
#[derive(Debug, Clone, PartialEq)]
pub struct FockOperators {
    cutoff: usize,
    pub a1: SparseOperator,
    pub a2: SparseOperator,
    pub jx: SparseOperator,
    pub jy: SparseOperator,
    pub jz: SparseOperator,
    pub n_total: SparseOperator,
}

impl FockOperators {
    pub fn new(cutoff: usize) -> Result<Self, FockError> {
        if cutoff == 0 {
            return Err(FockError::ZeroCutoff);
        }
        let side = cutoff + 1;
        let dim = side * side;
        let idx = |n1: usize, n2: usize| n1 * side + n2;
        let mut t1 = Vec::new();
        let mut t2 = Vec::new();
        for n1 in 0..side {
            for n2 in 0..side {
                if n1 > 0 {
                    t1.push((idx(n1 - 1, n2), idx(n1, n2), c((n1 as f64).sqrt(), 0.0)));
                }
                if n2 > 0 {
                    t2.push((idx(n1, n2 - 1), idx(n1, n2), c((n2 as f64).sqrt(), 0.0)));
                }
            }
        }
        let a1 = SparseOperator::from_triplets(dim, t1);
        let a2 = SparseOperator::from_triplets(dim, t2);
        let (a1d, a2d) = (a1.adjoint(), a2.adjoint());
        let n1 = a1d.compose(&a1);
        let n2 = a2d.compose(&a2);
        let hop = a1d.compose(&a2);
        let hop_back = a2d.compose(&a1);
        let half = c(0.5, 0.0);
        let jx = hop.add(&hop_back).scale(half);
        let jy = hop.add(&hop_back.scale(c(-1.0, 0.0))).scale(c(0.0, -0.5));
        let jz = n1.add(&n2.scale(c(-1.0, 0.0))).scale(half);
        let n_total = n1.add(&n2);
        Ok(Self {
            cutoff,
            a1,
            a2,
            jx,
            jy,
            jz,
            n_total,
        })
    }

    pub fn cutoff(&self) -> usize {
        self.cutoff
    }

    pub fn dim(&self) -> usize {
        (self.cutoff + 1) * (self.cutoff + 1)
    }
}

/// Normalized state vector on the cutoff box.
#[derive(Debug, Clone, PartialEq)]
pub struct FockState {
    cutoff: usize,
    amplitudes: Vec<C>,
    norm_defect: f64,
}

impl FockState {
    pub fn cutoff(&self) -> usize {
        self.cutoff
    }

    pub fn amplitudes(&self) -> &[C] {
        &self.amplitudes
    }

    /// Probability mass outside the box before renormalization.
    pub fn norm_defect(&self) -> f64 {
        self.norm_defect
    }

    pub fn amplitude(&self, n1: usize, n2: usize) -> C {
        self.amplitudes[n1 * (self.cutoff + 1) + n2]
    }

    pub fn expectation(&self, op: &SparseOperator) -> C {
        inner(&self.amplitudes, &op.apply(&self.amplitudes))
    }

    /// Applies a dense operator and returns the (unrenormalized) result.
    pub fn transformed(&self, op: &DMatrix<C>) -> Self {
        let v = op * nalgebra::DVector::from_column_slice(&self.amplitudes);
        Self {
            cutoff: self.cutoff,
            amplitudes: v.iter().copied().collect(),
            norm_defect: self.norm_defect,
        }
    }
}

fn inner(a: &[C], b: &[C]) -> C {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

fn single_mode_ladder(size: usize) -> DMatrix<C> {
    let mut a = DMatrix::zeros(size, size);
    for n in 1..size {
        a[(n - 1, n)] = c((n as f64).sqrt(), 0.0);
    }
    a
}

/// `exp(α a† − α* a)` on `size` levels.
fn displacement_matrix(alpha: C, size: usize) -> DMatrix<C> {
    let a = single_mode_ladder(size);
    let ad = a.adjoint();
    (ad * alpha - a * alpha.conj()).exp()
}

/// `exp[(ξ* a² − ξ a†²)/2]` on `size` levels.
fn squeezing_matrix(xi: C, size: usize) -> DMatrix<C> {
    let a = single_mode_ladder(size);
    let a2 = &a * &a;
    let ad2 = a2.adjoint();
    ((a2 * xi.conj() - ad2 * xi) * c(0.5, 0.0)).exp()
}

/// `exp(ξ* a₁a₂ − ξ a₁†a₂†)|0,0⟩` as amplitudes on `|n, n⟩`, `n < size`.
fn two_mode_squeezed_diagonal(xi: C, size: usize) -> Vec<C> {
    // the generator keeps n₁ − n₂ fixed; on the n₁ = n₂ sector it is tridiagonal
    let mut k = DMatrix::zeros(size, size);
    for n in 0..size - 1 {
        let m = (n + 1) as f64;
        k[(n + 1, n)] = -xi * m;
        k[(n, n + 1)] = xi.conj() * m;
    }
    let e = k.exp();
    e.column(0).iter().copied().collect()
}

fn padded_levels(cutoff: usize) -> usize {
    2 * cutoff + 17
}

/// Prepares the probe on the box `n₁, n₂ ≤ cutoff`: squeezing first, then
/// displacement, computed on a padded space and projected onto the box.
pub fn prepare_state(probe: &Probe, cutoff: usize) -> Result<FockState, FockError> {
    let state = prepare_state_unchecked(probe, cutoff)?;
    if state.norm_defect > MAX_NORM_DEFECT {
        return Err(FockError::CutoffTooSmall {
            cutoff,
            defect: state.norm_defect,
        });
    }
    Ok(state)
}

fn prepare_state_unchecked(probe: &Probe, cutoff: usize) -> Result<FockState, FockError> {
    if cutoff == 0 {
        return Err(FockError::ZeroCutoff);
    }
    let size = padded_levels(cutoff);
    let squeezed = match probe {
        Probe::Tmss(p) => tmss_squeezed(p, size),
        Probe::Smss(p) => smss_squeezed(p, size),
    };
    let [(m1, b1), (m2, b2)] = probe.displacements();
    let d1 = displacement_matrix(C::from_polar(m1, b1), size);
    let d2 = displacement_matrix(C::from_polar(m2, b2), size);
    let full = &d1 * squeezed * d2.transpose();
    let side = cutoff + 1;
    let mut amplitudes = Vec::with_capacity(side * side);
    for n1 in 0..side {
        for n2 in 0..side {
            amplitudes.push(full[(n1, n2)]);
        }
    }
    let kept: f64 = amplitudes.iter().map(|z| z.norm_sqr()).sum();
    let norm_defect = (1.0 - kept).max(0.0);
    let scale = 1.0 / kept.sqrt();
    for z in &mut amplitudes {
        *z *= scale;
    }
    Ok(FockState {
        cutoff,
        amplitudes,
        norm_defect,
    })
}

/// Amplitude matrix `M[n₁, n₂]` of the undisplaced two-mode squeezed vacuum.
fn tmss_squeezed(p: &TmssProbe, size: usize) -> DMatrix<C> {
    let diag = two_mode_squeezed_diagonal(C::from_polar(p.r(), p.theta()), size);
    DMatrix::from_diagonal(&nalgebra::DVector::from_vec(diag))
}

fn smss_squeezed(p: &SmssProbe, size: usize) -> DMatrix<C> {
    let s1 = squeezing_matrix(C::from_polar(p.r1(), 2.0 * p.theta1()), size);
    let s2 = squeezing_matrix(C::from_polar(p.r2(), 2.0 * p.theta2()), size);
    s1.column(0) * s2.column(0).transpose()
}

/// Generators `−i Û†∂_kÛ` of the interferometer in `(φ₀, φ, ψ, ω)` order,
/// for the Fock-space unitary whose mode action is the 2×2 interferometer
/// matrix.
pub fn schwinger_generators(params: &ParamVector, ops: &FockOperators) -> [SparseOperator; 4] {
    let (sf, cf) = params.phi().sin_cos();
    let (s2w, c2w) = (2.0 * params.omega()).sin_cos();
    let g_psi = ops
        .jz
        .scale(c(c2w, 0.0))
        .add(&ops.jx.scale(c(cf * s2w, 0.0)))
        .add(&ops.jy.scale(c(sf * s2w, 0.0)));
    let g_omega = ops
        .jy
        .scale(c(2.0 * cf, 0.0))
        .add(&ops.jx.scale(c(-2.0 * sf, 0.0)));
    [ops.n_total.clone(), ops.jz.clone(), g_psi, g_omega]
}

/// The half-angle generator set, matching a unitary with `e^{iωĴ_y}` in
/// place of `e^{2iωĴ_y}`. Its `ω` rotation covers only half the mixing
/// angle of the 2×2 matrix.
pub fn half_angle_generators(params: &ParamVector, ops: &FockOperators) -> [SparseOperator; 4] {
    let (sf, cf) = params.phi().sin_cos();
    let (sw, cw) = params.omega().sin_cos();
    let g_psi = ops
        .jz
        .scale(c(cw, 0.0))
        .add(&ops.jx.scale(c(cf * sw, 0.0)))
        .add(&ops.jy.scale(c(sf * sw, 0.0)));
    let g_omega = ops.jy.scale(c(cf, 0.0)).add(&ops.jx.scale(c(-sf, 0.0)));
    [ops.n_total.clone(), ops.jz.clone(), g_psi, g_omega]
}

/// Lifts a 2×2 mode matrix `h` to `Σ a_j† h_jk a_k`.
pub fn lift_mode_matrix(h: &[[C; 2]; 2], ops: &FockOperators) -> SparseOperator {
    let modes = [&ops.a1, &ops.a2];
    let mut out = SparseOperator::zeros(ops.dim());
    for j in 0..2 {
        let adj = modes[j].adjoint();
        for k in 0..2 {
            if h[j][k].norm() > 0.0 {
                out = out.add(&adj.compose(modes[k]).scale(h[j][k]));
            }
        }
    }
    out
}

/// `H_ij = 4 (Re⟨G_iG_j⟩ − ⟨G_i⟩⟨G_j⟩)`.
pub fn generator_qfim(state: &FockState, generators: &[SparseOperator; 4]) -> Matrix4<f64> {
    let psi = state.amplitudes();
    let images: Vec<Vec<C>> = generators.iter().map(|g| g.apply(psi)).collect();
    let means: Vec<f64> = images.iter().map(|v| inner(psi, v).re).collect();
    Matrix4::from_fn(|i, j| 4.0 * (inner(&images[i], &images[j]).re - means[i] * means[j]))
}

pub fn qfim_generator(probe: &Probe, params: &ParamVector, cutoff: usize) -> Result<Matrix4<f64>, FockError> {
    let ops = FockOperators::new(cutoff)?;
    let state = prepare_state(probe, cutoff)?;
    Ok(generator_qfim(&state, &schwinger_generators(params, &ops)))
}

pub fn cutoff_for(probe: &Probe, tol: f64) -> Result<usize, FockError> {
    cutoff_for_with_max(probe, tol, DEFAULT_MAX_CUTOFF)
}

/// Smallest cutoff with norm defect below `tol`: doubling, then bisection.
pub fn cutoff_for_with_max(probe: &Probe, tol: f64, max: usize) -> Result<usize, FockError> {
    let acceptable = |cutoff: usize| -> Result<bool, FockError> {
        Ok(prepare_state_unchecked(probe, cutoff)?.norm_defect < tol)
    };
    let mut hi = 1;
    while !acceptable(hi)? {
        if hi >= max {
            return Err(FockError::CutoffExceeded { max, tol });
        }
        hi = (2 * hi).min(max);
    }
    let mut lo = hi / 2;
    if lo == 0 {
        return Ok(hi);
    }
    // invariant: lo fails, hi passes
    while hi - lo > 1 {
        let mid = (lo + hi) / 2;
        if acceptable(mid)? {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(hi)
}

/// Dense Fock-space interferometer
/// `e^{iφ₀N̂} e^{iψĴ_z} e^{2iωĴ_y} e^{iφĴ_z}`.
pub fn passive_operator(params: &ParamVector, ops: &FockOperators) -> DMatrix<C> {
    let i = c(0.0, 1.0);
    let exp_of = |op: &SparseOperator, angle: f64| (op.to_dense() * (i * angle)).exp();
    exp_of(&ops.n_total, params.phi0())
        * exp_of(&ops.jz, params.psi())
        * exp_of(&ops.jy, 2.0 * params.omega())
        * exp_of(&ops.jz, params.phi())
}

/// Quadrature means `√2 (Re⟨a₁⟩, Im⟨a₁⟩, Re⟨a₂⟩, Im⟨a₂⟩)`.
pub fn quadrature_means(state: &FockState, ops: &FockOperators) -> Vector4<f64> {
    let a1 = state.expectation(&ops.a1);
    let a2 = state.expectation(&ops.a2);
    Vector4::new(a1.re, a1.im, a2.re, a2.im) * std::f64::consts::SQRT_2
}

pub fn mean_photon_number(state: &FockState, ops: &FockOperators) -> f64 {
    state.expectation(&ops.n_total).re
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn tmsv(r: f64, theta: f64) -> Probe {
        TmssProbe::vacuum_squeezed(r, theta).unwrap().into()
    }

    #[test]
    fn vacuum_preparation() {
        let s = prepare_state(&tmsv(0.0, 0.0), 3).unwrap();
        assert_abs_diff_eq!(s.amplitude(0, 0).re, 1.0, epsilon = 1e-14);
        assert!(s.norm_defect() < 1e-14);
        assert_eq!(cutoff_for(&tmsv(0.0, 0.0), 1e-6).unwrap(), 1);
    }

    #[test]
    fn two_mode_squeezed_vacuum_is_geometric() {
        let (r, theta) = (0.3, 0.8);
        let s = prepare_state(&tmsv(r, theta), 20).unwrap();
        let lambda = -C::from_polar(r.tanh(), theta);
        for n in 0..8 {
            let expected = lambda.powi(n as i32) / r.cosh();
            assert!((s.amplitude(n, n) - expected).norm() < 1e-12);
        }
        assert!(s.amplitude(1, 0).norm() < 1e-15);
    }

    #[test]
    fn schwinger_operators_are_hermitian() {
        let ops = FockOperators::new(5).unwrap();
        for op in [&ops.jx, &ops.jy, &ops.jz, &ops.n_total] {
            assert!(op.hermiticity_defect() < 1e-12);
        }
        let params = ParamVector::new(0.3, 1.0, 2.0, 0.6);
        for g in schwinger_generators(&params, &ops) {
            assert!(g.hermiticity_defect() < 1e-12);
        }
    }

    #[test]
    fn commutator_is_identity_below_edge() {
        let ops = FockOperators::new(4).unwrap();
        let ad = ops.a1.adjoint();
        let comm = ops.a1.compose(&ad).add(&ad.compose(&ops.a1).scale(c(-1.0, 0.0)));
        for n1 in 0..4 {
            for n2 in 0..5 {
                let k = n1 * 5 + n2;
                assert_abs_diff_eq!(comm.get(k, k).re, 1.0, epsilon = 1e-14);
            }
        }
    }

    #[test]
    fn special_generator_values() {
        let ops = FockOperators::new(3).unwrap();
        let g = schwinger_generators(&ParamVector::new(0.4, 0.0, 1.0, 0.0), &ops);
        assert_eq!(g[0], ops.n_total);
        assert_eq!(g[2], ops.jz);
        assert_eq!(g[3], ops.jy.scale(c(2.0, 0.0)));
    }

    #[test]
    fn jz_variance_vanishes_for_squeezed_vacuum() {
        let probe = tmsv(0.3, 0.4);
        let h = qfim_generator(&probe, &ParamVector::new(0.1, 0.2, 0.3, 0.4), 20).unwrap();
        assert!(h[(1, 1)].abs() < 1e-12);
    }

    #[test]
    fn cutoff_search_is_monotone() {
        let probe = tmsv(0.5, 0.0);
        let loose = cutoff_for(&probe, 1e-4).unwrap();
        let tight = cutoff_for(&probe, 1e-8).unwrap();
        assert!(tight >= loose);
        let d = prepare_state(&probe, tight).unwrap().norm_defect();
        assert!(d < 1e-8);
        assert!(prepare_state_unchecked(&probe, tight - 1).unwrap().norm_defect() >= 1e-8);
    }

    #[test]
    fn small_cutoff_rejected() {
        assert!(matches!(
            prepare_state(&tmsv(1.5, 0.0), 2),
            Err(FockError::CutoffTooSmall { .. })
        ));
        assert!(matches!(
            cutoff_for_with_max(&tmsv(1.5, 0.0), 1e-10, 8),
            Err(FockError::CutoffExceeded { .. })
        ));
    }
}
