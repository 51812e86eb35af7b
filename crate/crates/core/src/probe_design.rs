//! Parameter sweeps, `O(N²)` eigenvalue analysis, probe optimization and
//! the SMSS/TMSS beam-splitter equivalence.

use std::f64::consts::{FRAC_PI_2, TAU};

use nalgebra::{Matrix4, SymmetricEigen};
use rayon::prelude::*;
use thiserror::Error;

use crate::gaussian::{evolve, smss_state, tmss_state, GaussianError, Probe, ResourceBudget, TmssProbe};
use crate::interferometer::{bs_unitary, rotation_of, ComplexMatrix2, ParamVector};
use crate::qfim::{qcrb_bounds, qfim_through, BoundsReport, Qfim, QfimError};

/// Photon numbers used for the `O(N²)` coefficient fits.
pub const N2_GRID: [f64; 4] = [100.0, 200.0, 400.0, 800.0];
/// Relative threshold separating `O(N²)` eigenvalues from the rest.
pub const N2_THRESHOLD: f64 = 1e-6;
pub const TIE_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DesignError {
    #[error("sweep grid is empty")]
    EmptyGrid,
    #[error("sweep grid is not strictly monotone at index {0}")]
    NotMonotone(usize),
    #[error("grid value {value} is outside the legal range of `{variable}`")]
    OutOfRange { variable: &'static str, value: f64 },
    #[error("`{0}` cannot be swept for this probe family")]
    UnsupportedVariable(&'static str),
    #[error("no free variables given")]
    NothingFree,
    #[error(transparent)]
    Gaussian(#[from] GaussianError),
    #[error(transparent)]
    Qfim(#[from] QfimError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ProbeFamily {
    Tmss,
    Smss,
}

/// Which QFIM summand a sweep or analysis looks at.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum MatrixSelector {
    #[default]
    Total,
    Displacement,
    Covariance,
}

impl MatrixSelector {
    pub fn pick<'a>(&self, q: &'a Qfim) -> &'a Matrix4<f64> {
        match self {
            MatrixSelector::Total => q.total(),
            MatrixSelector::Displacement => q.h_d(),
            MatrixSelector::Covariance => q.h_gamma(),
        }
    }
}

/// Squeezing and displacement phases of a probe. TMSS probes read `theta`;
/// SMSS probes read `theta1` and `theta2`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProbePhases {
    pub theta: f64,
    pub theta1: f64,
    pub theta2: f64,
    pub beta1: f64,
    pub beta2: f64,
}

impl Default for ProbePhases {
    fn default() -> Self {
        Self {
            theta: 0.0,
            theta1: FRAC_PI_2,
            theta2: 0.0,
            beta1: 0.0,
            beta2: 0.0,
        }
    }
}

/// A probe family with its phases, the budget and the input coupling.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProbeDesign {
    pub family: ProbeFamily,
    pub phases: ProbePhases,
    pub budget: ResourceBudget,
    /// Prepend the fixed 50:50 beam splitter to the interferometer.
    pub beam_splitter: bool,
}

impl ProbeDesign {
    pub fn probe(&self) -> Probe {
        let p = &self.phases;
        match self.family {
            ProbeFamily::Tmss => self.budget.tmss_probe(p.theta, p.beta1, p.beta2).into(),
            ProbeFamily::Smss => self
                .budget
                .smss_probe(p.theta1, p.theta2, p.beta1, p.beta2)
                .into(),
        }
    }

    pub fn input_unitary(&self) -> ComplexMatrix2 {
        if self.beam_splitter {
            bs_unitary()
        } else {
            ComplexMatrix2::identity()
        }
    }

    pub fn qfim(&self, params: &ParamVector) -> Result<Qfim, QfimError> {
        qfim_through(&self.probe().state(), params, &self.input_unitary())
    }

    fn with_n(&self, n: f64) -> Result<Self, GaussianError> {
        let b = ResourceBudget::new(0.5 * n, 0.5 * n, self.budget.tau(), self.budget.eta())?;
        Ok(Self { budget: b, ..*self })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SweptVariable {
    /// Total photon number with `N_s = N_c = N/2`.
    N,
    Tau,
    Eta,
    Omega,
    /// `θ − β₁ − β₂`, applied by moving `θ` (TMSS only).
    PhaseMismatch,
}

impl SweptVariable {
    pub fn name(&self) -> &'static str {
        match self {
            SweptVariable::N => "N",
            SweptVariable::Tau => "tau",
            SweptVariable::Eta => "eta",
            SweptVariable::Omega => "omega",
            SweptVariable::PhaseMismatch => "phase_mismatch",
        }
    }

    fn legal(&self, v: f64) -> bool {
        v.is_finite()
            && match self {
                SweptVariable::N => v > 0.0,
                SweptVariable::Tau | SweptVariable::Eta => (0.0..=1.0).contains(&v),
                SweptVariable::Omega => (0.0..=FRAC_PI_2).contains(&v),
                SweptVariable::PhaseMismatch => true,
            }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepSpec {
    pub design: ProbeDesign,
    pub variable: SweptVariable,
    pub grid: Vec<f64>,
    pub params: ParamVector,
    pub matrix: MatrixSelector,
}

impl SweepSpec {
    pub fn validate(&self) -> Result<(), DesignError> {
        if self.grid.is_empty() {
            return Err(DesignError::EmptyGrid);
        }
        let increasing = self.grid.len() < 2 || self.grid[1] > self.grid[0];
        for (i, w) in self.grid.windows(2).enumerate() {
            if (increasing && w[1] <= w[0]) || (!increasing && w[1] >= w[0]) {
                return Err(DesignError::NotMonotone(i + 1));
            }
        }
        if let Some(&value) = self.grid.iter().find(|&&v| !self.variable.legal(v)) {
            return Err(DesignError::OutOfRange {
                variable: self.variable.name(),
                value,
            });
        }
        if self.variable == SweptVariable::PhaseMismatch && self.design.family != ProbeFamily::Tmss {
            return Err(DesignError::UnsupportedVariable("phase_mismatch"));
        }
        Ok(())
    }

    fn point(&self, value: f64) -> Result<(ProbeDesign, ParamVector), DesignError> {
        let mut design = self.design;
        let mut params = self.params;
        match self.variable {
            SweptVariable::N => design = design.with_n(value)?,
            SweptVariable::Tau => design.budget = design.budget.with_tau(value)?,
            SweptVariable::Eta => design.budget = design.budget.with_eta(value)?,
            SweptVariable::Omega => params = params.with_omega(value),
            SweptVariable::PhaseMismatch => {
                design.phases.theta = design.phases.beta1 + design.phases.beta2 + value
            }
        }
        Ok((design, params))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepRow {
    pub value: f64,
    pub scalar_bound: f64,
    pub per_param: [f64; 4],
    pub eigenvalues: [f64; 4],
    pub singular: bool,
    /// The evolved covariance could not be inverted; all numbers are NaN.
    pub failed: bool,
}

impl SweepRow {
    fn from_bounds(value: f64, b: &BoundsReport) -> Self {
        Self {
            value,
            scalar_bound: b.scalar_bound,
            per_param: b.per_param,
            eigenvalues: b.eigenvalues,
            singular: b.singular,
            failed: false,
        }
    }

    fn failed(value: f64) -> Self {
        Self {
            value,
            scalar_bound: f64::NAN,
            per_param: [f64::NAN; 4],
            eigenvalues: [f64::NAN; 4],
            singular: true,
            failed: true,
        }
    }
}

/// One row per grid point, in grid order.
pub fn run_sweep(spec: &SweepSpec) -> Result<Vec<SweepRow>, DesignError> {
    spec.validate()?;
    let points = spec
        .grid
        .iter()
        .map(|&v| spec.point(v))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(spec
        .grid
        .par_iter()
        .zip(points.par_iter())
        .map(|(&value, (design, params))| match design.qfim(params) {
            Ok(q) => SweepRow::from_bounds(value, &qcrb_bounds(spec.matrix.pick(&q))),
            Err(_) => SweepRow::failed(value),
        })
        .collect())
}

/// Leading `N²` coefficients of the sorted eigenvalues.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct N2Analysis {
    pub count: usize,
    /// One coefficient per eigenvalue, eigenvalues sorted ascending.
    pub coefficients: [f64; 4],
    pub threshold: f64,
}

fn sorted_eigenvalues(h: &Matrix4<f64>) -> [f64; 4] {
    let mut e: [f64; 4] = SymmetricEigen::new((h + h.transpose()) * 0.5).eigenvalues.into();
    e.sort_by(f64::total_cmp);
    e
}

/// Fits `λ(N) = c₂N² + c₁N + c₀` to each sorted eigenvalue over
/// [`N2_GRID`] and counts coefficients `c₂` above `N2_THRESHOLD · max c₂`.
pub fn n2_coefficient_rank(
    design: &ProbeDesign,
    params: &ParamVector,
    matrix: MatrixSelector,
) -> Result<N2Analysis, DesignError> {
    let scale = N2_GRID[N2_GRID.len() - 1];
    let mut eig = Vec::with_capacity(N2_GRID.len());
    for &n in &N2_GRID {
        let q = design.with_n(n)?.qfim(params)?;
        eig.push(sorted_eigenvalues(matrix.pick(&q)));
    }
    let a = nalgebra::DMatrix::from_fn(N2_GRID.len(), 3, |i, j| (N2_GRID[i] / scale).powi(2 - j as i32));
    let svd = a.svd(true, true);
    let mut coefficients = [0.0; 4];
    for (k, c) in coefficients.iter_mut().enumerate() {
        let b = nalgebra::DVector::from_fn(N2_GRID.len(), |i, _| eig[i][k]);
        let x = svd.solve(&b, 1e-14).expect("both factors computed");
        *c = x[0] / (scale * scale);
    }
    let max = coefficients.iter().fold(0.0f64, |m, v| m.max(*v));
    let threshold = N2_THRESHOLD * max;
    let count = coefficients.iter().filter(|&&c| max > 0.0 && c > threshold).count();
    Ok(N2Analysis {
        count,
        coefficients,
        threshold,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum DesignVariable {
    Theta,
    Theta1,
    Theta2,
    Beta1,
    Beta2,
    Tau,
    Eta,
}

impl DesignVariable {
    pub fn name(&self) -> &'static str {
        match self {
            DesignVariable::Theta => "theta",
            DesignVariable::Theta1 => "theta1",
            DesignVariable::Theta2 => "theta2",
            DesignVariable::Beta1 => "beta1",
            DesignVariable::Beta2 => "beta2",
            DesignVariable::Tau => "tau",
            DesignVariable::Eta => "eta",
        }
    }

    fn is_weight(&self) -> bool {
        matches!(self, DesignVariable::Tau | DesignVariable::Eta)
    }

    fn coarse_grid(&self, settings: &SearchSettings) -> Vec<f64> {
        if self.is_weight() {
            let n = settings.weight_points;
            (0..n).map(|i| i as f64 / (n - 1) as f64).collect()
        } else {
            let n = settings.angle_points;
            (0..n).map(|i| TAU * i as f64 / n as f64).collect()
        }
    }

    fn coarse_step(&self, settings: &SearchSettings) -> f64 {
        if self.is_weight() {
            1.0 / (settings.weight_points - 1) as f64
        } else {
            TAU / settings.angle_points as f64
        }
    }

    fn normalize(&self, v: f64) -> f64 {
        if self.is_weight() {
            v.clamp(0.0, 1.0)
        } else {
            let w = v.rem_euclid(TAU);
            if w >= TAU {
                0.0
            } else {
                w
            }
        }
    }

    fn read(&self, design: &ProbeDesign) -> f64 {
        let p = &design.phases;
        match self {
            DesignVariable::Theta => p.theta,
            DesignVariable::Theta1 => p.theta1,
            DesignVariable::Theta2 => p.theta2,
            DesignVariable::Beta1 => p.beta1,
            DesignVariable::Beta2 => p.beta2,
            DesignVariable::Tau => design.budget.tau(),
            DesignVariable::Eta => design.budget.eta(),
        }
    }

    fn write(&self, design: &mut ProbeDesign, v: f64) {
        let p = &mut design.phases;
        match self {
            DesignVariable::Theta => p.theta = v,
            DesignVariable::Theta1 => p.theta1 = v,
            DesignVariable::Theta2 => p.theta2 = v,
            DesignVariable::Beta1 => p.beta1 = v,
            DesignVariable::Beta2 => p.beta2 = v,
            DesignVariable::Tau => design.budget = design.budget.with_tau(v).expect("clamped"),
            DesignVariable::Eta => design.budget = design.budget.with_eta(v).expect("clamped"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SearchSettings {
    pub angle_points: usize,
    pub weight_points: usize,
    pub rounds: usize,
    pub shrink: f64,
    /// Local points on each side of the incumbent per refinement scan.
    pub half_width: usize,
}

impl Default for SearchSettings {
    fn default() -> Self {
        Self {
            angle_points: 24,
            weight_points: 21,
            rounds: 3,
            shrink: 0.1,
            half_width: 10,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TraceEntry {
    /// 0 for the coarse scan, then the refinement round.
    pub round: usize,
    pub variable: Option<DesignVariable>,
    pub values: Vec<f64>,
    pub scalar_bound: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OptimizationResult {
    pub free: Vec<DesignVariable>,
    pub best: ProbeDesign,
    pub scalar_bound: f64,
    pub best_grid_bound: f64,
    pub all_singular: bool,
    pub evaluations: usize,
    pub trace: Vec<TraceEntry>,
    /// Final refinement step per free variable.
    pub resolution: Vec<f64>,
}

impl OptimizationResult {
    pub fn values(&self) -> Vec<f64> {
        self.free.iter().map(|v| v.read(&self.best)).collect()
    }
}

fn objective(design: &ProbeDesign, params: &ParamVector) -> f64 {
    match design.qfim(params) {
        Ok(q) => {
            let b = q.bounds();
            if b.singular {
                f64::INFINITY
            } else {
                b.scalar_bound
            }
        }
        Err(_) => f64::INFINITY,
    }
}

fn lex_less(a: &[f64], b: &[f64]) -> bool {
    for (x, y) in a.iter().zip(b) {
        if x < y {
            return true;
        }
        if x > y {
            return false;
        }
    }
    false
}

/// `(value, configuration)` ordering: lower bound wins, ties within
/// [`TIE_TOLERANCE`] go to the lexicographically smaller configuration.
fn better(a: (f64, &[f64]), b: (f64, &[f64])) -> bool {
    if a.0.is_infinite() && b.0.is_infinite() {
        return lex_less(a.1, b.1);
    }
    if (a.0 - b.0).abs() <= TIE_TOLERANCE {
        return lex_less(a.1, b.1);
    }
    a.0 < b.0
}

fn apply(base: &ProbeDesign, free: &[DesignVariable], values: &[f64]) -> ProbeDesign {
    let mut d = *base;
    for (v, &x) in free.iter().zip(values) {
        v.write(&mut d, x);
    }
    d
}

/// Grid scan over the free variables followed by coordinate-descent
/// refinement on successively finer local grids.
pub fn optimize_probe(
    base: &ProbeDesign,
    params: &ParamVector,
    free: &[DesignVariable],
    settings: &SearchSettings,
) -> Result<OptimizationResult, DesignError> {
    if free.is_empty() {
        return Err(DesignError::NothingFree);
    }
    let mut free = free.to_vec();
    free.sort();
    free.dedup();
    let grids: Vec<Vec<f64>> = free.iter().map(|v| v.coarse_grid(settings)).collect();
    let total: usize = grids.iter().map(Vec::len).product();
    let configs: Vec<Vec<f64>> = (0..total)
        .map(|mut index| {
            let mut values = vec![0.0; free.len()];
            for k in (0..free.len()).rev() {
                values[k] = grids[k][index % grids[k].len()];
                index /= grids[k].len();
            }
            values
        })
        .collect();
    let scores: Vec<f64> = configs
        .par_iter()
        .map(|values| objective(&apply(base, &free, values), params))
        .collect();
    let mut best = 0;
    for i in 1..total {
        if better((scores[i], &configs[i]), (scores[best], &configs[best])) {
            best = i;
        }
    }
    let mut values = configs[best].clone();
    let mut score = scores[best];
    let best_grid_bound = score;
    let all_singular = scores.iter().all(|s| s.is_infinite());
    let mut evaluations = total;
    let mut trace = vec![TraceEntry {
        round: 0,
        variable: None,
        values: values.clone(),
        scalar_bound: score,
    }];
    let mut steps: Vec<f64> = free.iter().map(|v| v.coarse_step(settings)).collect();
    if !all_singular {
        for round in 1..=settings.rounds {
            for s in &mut steps {
                *s *= settings.shrink;
            }
            for (k, var) in free.iter().enumerate() {
                let centre = values[k];
                let h = settings.half_width as i64;
                let candidates: Vec<Vec<f64>> = (-h..=h)
                    .map(|j| {
                        let mut c = values.clone();
                        c[k] = var.normalize(centre + j as f64 * steps[k]);
                        c
                    })
                    .collect();
                let local: Vec<f64> = candidates
                    .par_iter()
                    .map(|c| objective(&apply(base, &free, c), params))
                    .collect();
                evaluations += candidates.len();
                for (c, &s) in candidates.iter().zip(&local) {
                    if better((s, c), (score, &values)) {
                        values = c.clone();
                        score = s;
                    }
                }
                trace.push(TraceEntry {
                    round,
                    variable: Some(*var),
                    values: values.clone(),
                    scalar_bound: score,
                });
            }
        }
    }
    Ok(OptimizationResult {
        best: apply(base, &free, &values),
        free,
        scalar_bound: score,
        best_grid_bound,
        all_singular,
        evaluations,
        trace,
        resolution: steps,
    })
}

/// Scalar bounds of the two candidate displacement-phase choices for an
/// SMSS probe, plus a free optimization over both phases.
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseChoiceReport {
    /// `(β₁, β₂, scalar bound)` per candidate.
    pub candidates: Vec<(f64, f64, f64)>,
    pub winner: usize,
    pub optimized: OptimizationResult,
}

pub fn resolve_smss_displacement_phases(
    base: &ProbeDesign,
    params: &ParamVector,
    candidates: &[(f64, f64)],
    settings: &SearchSettings,
) -> Result<PhaseChoiceReport, DesignError> {
    let scored: Vec<(f64, f64, f64)> = candidates
        .iter()
        .map(|&(b1, b2)| {
            let mut d = *base;
            d.phases.beta1 = b1;
            d.phases.beta2 = b2;
            (b1, b2, objective(&d, params))
        })
        .collect();
    let mut winner = 0;
    for (i, c) in scored.iter().enumerate() {
        if c.2 < scored[winner].2 {
            winner = i;
        }
    }
    let optimized = optimize_probe(
        base,
        params,
        &[DesignVariable::Beta1, DesignVariable::Beta2],
        settings,
    )?;
    Ok(PhaseChoiceReport {
        candidates: scored,
        winner,
        optimized,
    })
}

/// Squeezing `(r, θ)` of a covariance in two-mode squeezed form, and the
/// max-abs distance to that form.
pub fn tmss_form_of(gamma: &Matrix4<f64>) -> (f64, f64, f64) {
    let (g02, g03) = (gamma[(0, 2)], gamma[(0, 3)]);
    let sh = 2.0 * (g02 * g02 + g03 * g03).sqrt();
    let r = 0.5 * sh.asinh();
    let theta = (-g03).atan2(-g02) + 0.0;
    let fitted = tmss_state(&TmssProbe::vacuum_squeezed(r, theta).expect("r ≥ 0"));
    (r, theta, (fitted.gamma() - gamma).amax())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EquivalenceReport {
    pub r: f64,
    /// Squeezing phase of the TMSS produced by the beam splitter.
    pub tmss_theta: f64,
    /// `max |R Γ_SMSS Rᵀ − Γ_TMSS|`.
    pub covariance_deviation: f64,
    /// `max |H^Γ' − H^Γ|` between the two QFIM covariance parts.
    pub hgamma_deviation: f64,
    /// Exact image of the SMSS probe: `max |H' − H| / max |H|`.
    pub image_total_deviation: f64,
    /// Canonical phase-matched TMSS (`θ = β₁ = β₂ = 0`):
    /// `max |H'_ij − H_ij| / √(H_ii H_jj)`.
    pub canonical_total_deviation: f64,
    pub canonical_hgamma_deviation: f64,
}

/// Compares an equally squeezed SMSS probe through `U · U_BS` with the TMSS
/// probe it turns into, and with the canonical phase-matched TMSS of the
/// same budget.
pub fn smss_tmss_equivalence(
    r: f64,
    params: &ParamVector,
    smss: &ProbeDesign,
) -> Result<EquivalenceReport, DesignError> {
    let bs = bs_unitary();
    let bs_rot = rotation_of(&bs);
    let bare = crate::gaussian::SmssProbe::new(
        r,
        r,
        smss.phases.theta1,
        smss.phases.theta2,
        0.0,
        0.0,
        0.0,
        0.0,
    )?;
    let mixed = evolve(&smss_state(&bare), &bs_rot);
    let (_, tmss_theta, covariance_deviation) = tmss_form_of(mixed.gamma());
    let tmss_bare = TmssProbe::vacuum_squeezed(r, tmss_theta)?;
    let hg_smss = qfim_through(&smss_state(&bare), params, &bs)?;
    let hg_tmss = qfim_through(&tmss_state(&tmss_bare), params, &ComplexMatrix2::identity())?;
    let hgamma_deviation = (hg_smss.h_gamma() - hg_tmss.h_gamma()).amax();

    let design = ProbeDesign {
        family: ProbeFamily::Smss,
        beam_splitter: false,
        ..*smss
    };
    let state = design.probe().state();
    let h_smss = qfim_through(&state, params, &bs)?;
    let image = evolve(&state, &bs_rot);
    let (ri, ti, _) = tmss_form_of(image.gamma());
    let d = image.d();
    let a1 = 0.5f64.sqrt() * (d[0] * d[0] + d[1] * d[1]).sqrt();
    let a2 = 0.5f64.sqrt() * (d[2] * d[2] + d[3] * d[3]).sqrt();
    let image_probe = TmssProbe::new(ri, ti, a1, a2, d[1].atan2(d[0]), d[3].atan2(d[2]))?;
    let h_image = qfim_through(&tmss_state(&image_probe), params, &ComplexMatrix2::identity())?;
    let image_total_deviation = (h_smss.total() - h_image.total()).amax() / h_image.total().amax();

    let canonical = ProbeDesign {
        family: ProbeFamily::Tmss,
        phases: ProbePhases {
            theta: 0.0,
            beta1: 0.0,
            beta2: 0.0,
            ..ProbePhases::default()
        },
        budget: smss.budget,
        beam_splitter: false,
    };
    let h_canon = canonical.qfim(params)?;
    Ok(EquivalenceReport {
        r,
        tmss_theta,
        covariance_deviation,
        hgamma_deviation,
        image_total_deviation,
        canonical_total_deviation: normalized_deviation(h_smss.total(), h_canon.total()),
        canonical_hgamma_deviation: normalized_deviation(h_smss.h_gamma(), h_canon.h_gamma()),
    })
}

/// `max_ij |A_ij − B_ij| / √(A_ii A_jj)`, over pairs with positive diagonals.
pub fn normalized_deviation(a: &Matrix4<f64>, b: &Matrix4<f64>) -> f64 {
    let mut worst: f64 = 0.0;
    for i in 0..4 {
        for j in 0..4 {
            let scale = (a[(i, i)] * a[(j, j)]).sqrt();
            if scale > 0.0 {
                worst = worst.max((a[(i, j)] - b[(i, j)]).abs() / scale);
            }
        }
    }
    worst
}

/// Log-log least-squares slope.
pub fn loglog_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let lx: Vec<f64> = xs.iter().map(|x| x.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|y| y.ln()).collect();
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxy: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = lx.iter().map(|x| (x - mx).powi(2)).sum();
    sxy / sxx
}

/// `count` logarithmically spaced values from `lo` to `hi`.
pub fn log_grid(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    if count == 1 {
        return vec![lo];
    }
    let ratio = (hi / lo).ln();
    (0..count)
        .map(|i| match i {
            0 => lo,
            _ if i == count - 1 => hi,
            _ => lo * (ratio * i as f64 / (count - 1) as f64).exp(),
        })
        .collect()
}

/// Distance of an angle from `0 (mod 2π)`.
pub fn angle_distance_to_zero(x: f64) -> f64 {
    let w = x.rem_euclid(TAU);
    w.min(TAU - w)
}
