//! Command-line front end. Each command reads one JSON run configuration and
//! writes a JSON report (or a CSV table for `sweep`).

use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, FRAC_PI_8};
use std::fs;
use std::io::{self, Read, Write};
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use clap::{Args, Parser, Subcommand, ValueEnum};
use nalgebra::Matrix4;
use serde::Deserialize;
use serde_json::{json, Value};
use thiserror::Error;

use crate::fock_oracle::{
    cutoff_for_with_max, generator_qfim, prepare_state, schwinger_generators, FockError,
    FockOperators,
};
use crate::gaussian::{check_physical, mean_photon_number, Probe, ResourceBudget, SmssProbe, TmssProbe};
use crate::interferometer::ParamVector;
use crate::probe_design::{
    log_grid, optimize_probe, resolve_smss_displacement_phases, run_sweep, smss_tmss_equivalence,
    DesignVariable, MatrixSelector, OptimizationResult, ProbeDesign, ProbeFamily, ProbePhases,
    SearchSettings, SweepRow, SweepSpec, SweptVariable,
};
use crate::qfim::{
    closed_form_hd_tmss, closed_form_hd_tmss_flipped_psi_term, closed_form_hgamma_smss_general,
    closed_form_hgamma_tmss, qfim_through, BoundsReport, Qfim,
};

pub const SCHEMA_VERSION: &str = "1";
/// Relative spread allowed for the oracle ratio constancy check.
pub const RATIO_SPREAD_TOLERANCE: f64 = 0.01;

#[derive(Debug, Parser)]
#[command(name = "twomode-qfim", version, about = "QFIM and Cramér–Rao bounds for two-mode Gaussian interferometry")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// QFIM, bounds and closed-form comparisons for one probe.
    Compute(CommonArgs),
    /// One row per grid point of a swept variable.
    Sweep(CommonArgs),
    /// Gaussian QFIM against the truncated Fock-space generator QFIM.
    OracleCheck(CommonArgs),
    /// Grid search plus coordinate descent over probe phases and weights.
    Optimize(CommonArgs),
    /// SMSS through a beam splitter against the matching TMSS.
    Equivalence(CommonArgs),
}

#[derive(Debug, Args)]
pub struct CommonArgs {
    /// Path to the JSON configuration, or `-` for standard input.
    #[arg(long)]
    pub config: String,
    /// Output file; standard output when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub format: Option<Format>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

impl Format {
    fn name(self) -> &'static str {
        match self {
            Format::Csv => "csv",
            Format::Json => "json",
        }
    }
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config: {0}")]
    Config(String),
    #[error("numerical failure: {0}")]
    Numeric(String),
    #[error("cutoff: {0}")]
    Cutoff(String),
    #[error("output: {0}")]
    Output(#[from] io::Error),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            CliError::Numeric(_) => 3,
            CliError::Cutoff(_) => 4,
            CliError::Output(_) => 1,
        }
    }
}

fn config_err(key: &str, e: impl std::fmt::Display) -> CliError {
    CliError::Config(format!("`{key}`: {e}"))
}

fn numeric_err(e: impl std::fmt::Display) -> CliError {
    CliError::Numeric(e.to_string())
}

// ---------------------------------------------------------------- config

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub degrees: bool,
    pub probe: Option<ProbeConfig>,
    pub design: Option<DesignConfig>,
    #[serde(default)]
    pub params: ParamsConfig,
    pub sweep: Option<SweepConfig>,
    pub optimize: Option<OptimizeConfig>,
    pub oracle: Option<OracleConfig>,
    pub equivalence: Option<EquivalenceConfig>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "family", rename_all = "lowercase", deny_unknown_fields)]
pub enum ProbeConfig {
    Tmss {
        r: f64,
        #[serde(default)]
        theta: f64,
        #[serde(default)]
        alpha1: f64,
        #[serde(default)]
        alpha2: f64,
        #[serde(default)]
        beta1: f64,
        #[serde(default)]
        beta2: f64,
    },
    Smss {
        r1: f64,
        r2: f64,
        #[serde(default = "half_pi")]
        theta1: f64,
        #[serde(default)]
        theta2: f64,
        #[serde(default)]
        alpha1: f64,
        #[serde(default)]
        alpha2: f64,
        #[serde(default)]
        beta1: f64,
        #[serde(default)]
        beta2: f64,
    },
}

fn half_pi() -> f64 {
    FRAC_PI_2
}

fn half() -> f64 {
    0.5
}

#[derive(Debug, Clone, Copy, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "lowercase")]
pub enum FamilyName {
    Tmss,
    Smss,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DesignConfig {
    pub family: FamilyName,
    /// Total photon number, split evenly between squeezing and displacement.
    pub n: Option<f64>,
    pub n_s: Option<f64>,
    pub n_c: Option<f64>,
    #[serde(default = "half")]
    pub tau: f64,
    #[serde(default = "half")]
    pub eta: f64,
    #[serde(default)]
    pub theta: f64,
    pub theta1: Option<f64>,
    #[serde(default)]
    pub theta2: f64,
    #[serde(default)]
    pub beta1: f64,
    #[serde(default)]
    pub beta2: f64,
    #[serde(default)]
    pub beam_splitter: bool,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParamsConfig {
    #[serde(default)]
    pub phi0: f64,
    #[serde(default)]
    pub phi: f64,
    #[serde(default)]
    pub psi: f64,
    pub omega: Option<f64>,
}

impl Default for ParamsConfig {
    fn default() -> Self {
        Self {
            phi0: 0.0,
            phi: 0.0,
            psi: 0.0,
            omega: None,
        }
    }
}

#[derive(Debug, Clone, Copy, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "snake_case")]
pub enum VariableName {
    #[serde(rename = "N")]
    N,
    Tau,
    Eta,
    Omega,
    PhaseMismatch,
}

#[derive(Debug, Clone, Copy, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "lowercase")]
pub enum SpacingKind {
    Linear,
    Log,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpacingConfig {
    pub kind: SpacingKind,
    pub from: f64,
    pub to: f64,
    pub count: usize,
}

#[derive(Debug, Clone, Copy, Deserialize, PartialEq, Eq, Default)]
#[serde(rename_all = "lowercase")]
pub enum MatrixName {
    #[default]
    Total,
    Displacement,
    Covariance,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    pub variable: VariableName,
    pub values: Option<Vec<f64>>,
    pub spacing: Option<SpacingConfig>,
    #[serde(default)]
    pub matrix: MatrixName,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OptimizeConfig {
    pub free: Vec<String>,
    pub angle_points: Option<usize>,
    pub weight_points: Option<usize>,
    pub rounds: Option<usize>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OracleConfig {
    #[serde(default = "default_oracle_r")]
    pub r_values: Vec<f64>,
    pub omega_values: Option<Vec<f64>>,
    #[serde(default)]
    pub theta: f64,
    #[serde(default = "default_alpha1")]
    pub alpha1: f64,
    #[serde(default = "default_alpha2")]
    pub alpha2: f64,
    #[serde(default)]
    pub beta1: f64,
    #[serde(default)]
    pub beta2: f64,
    #[serde(default = "default_tol")]
    pub tol: f64,
    #[serde(default = "default_max_cutoff")]
    pub max_cutoff: usize,
}

fn default_oracle_r() -> Vec<f64> {
    vec![0.1, 0.25, 0.4]
}
fn default_alpha1() -> f64 {
    0.4
}
fn default_alpha2() -> f64 {
    0.3
}
fn default_tol() -> f64 {
    1e-8
}
fn default_max_cutoff() -> usize {
    crate::fock_oracle::DEFAULT_MAX_CUTOFF
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EquivalenceConfig {
    #[serde(default = "default_equivalence_r")]
    pub r_values: Vec<f64>,
}

fn default_equivalence_r() -> Vec<f64> {
    vec![0.2, 0.5, 1.0]
}

impl Default for OracleConfig {
    fn default() -> Self {
        serde_json::from_str("{}").expect("all fields defaulted")
    }
}

struct Angles {
    degrees: bool,
}

impl Angles {
    fn get(&self, x: f64) -> f64 {
        if self.degrees {
            x.to_radians()
        } else {
            x
        }
    }
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        serde_json::from_str(text).map_err(|e| CliError::Config(e.to_string()))
    }

    fn angles(&self) -> Angles {
        Angles {
            degrees: self.degrees,
        }
    }

    pub fn param_vector(&self) -> ParamVector {
        let a = self.angles();
        let p = &self.params;
        ParamVector::new(
            a.get(p.phi0),
            a.get(p.phi),
            a.get(p.psi),
            p.omega.map(|w| a.get(w)).unwrap_or(FRAC_PI_4),
        )
    }

    pub fn explicit_probe(&self) -> Result<Option<Probe>, CliError> {
        let a = self.angles();
        let Some(p) = &self.probe else {
            return Ok(None);
        };
        let probe: Probe = match *p {
            ProbeConfig::Tmss {
                r,
                theta,
                alpha1,
                alpha2,
                beta1,
                beta2,
            } => TmssProbe::new(r, a.get(theta), alpha1, alpha2, a.get(beta1), a.get(beta2))
                .map_err(|e| config_err("probe", e))?
                .into(),
            ProbeConfig::Smss {
                r1,
                r2,
                theta1,
                theta2,
                alpha1,
                alpha2,
                beta1,
                beta2,
            } => SmssProbe::new(
                r1,
                r2,
                a.get(theta1),
                a.get(theta2),
                alpha1,
                alpha2,
                a.get(beta1),
                a.get(beta2),
            )
            .map_err(|e| config_err("probe", e))?
            .into(),
        };
        Ok(Some(probe))
    }

    pub fn design(&self) -> Result<Option<ProbeDesign>, CliError> {
        let a = self.angles();
        let Some(d) = &self.design else {
            return Ok(None);
        };
        let (n_s, n_c) = match (d.n, d.n_s, d.n_c) {
            (Some(n), None, None) => (0.5 * n, 0.5 * n),
            (None, Some(s), Some(c)) => (s, c),
            _ => {
                return Err(config_err(
                    "design",
                    "give either `n` or both `n_s` and `n_c`",
                ))
            }
        };
        let budget = ResourceBudget::new(n_s, n_c, d.tau, d.eta).map_err(|e| config_err("design", e))?;
        let theta1 = match d.theta1 {
            Some(t) => a.get(t),
            None => FRAC_PI_2,
        };
        Ok(Some(ProbeDesign {
            family: match d.family {
                FamilyName::Tmss => ProbeFamily::Tmss,
                FamilyName::Smss => ProbeFamily::Smss,
            },
            phases: ProbePhases {
                theta: a.get(d.theta),
                theta1,
                theta2: a.get(d.theta2),
                beta1: a.get(d.beta1),
                beta2: a.get(d.beta2),
            },
            budget,
            beam_splitter: d.beam_splitter,
        }))
    }

    fn require_design(&self) -> Result<ProbeDesign, CliError> {
        self.design()?
            .ok_or_else(|| CliError::Config("missing key `design`".into()))
    }
}

// ---------------------------------------------------------------- output

/// Writes every float as `{:.16e}` (17 significant digits).
struct FixedFloats;

impl serde_json::ser::Formatter for FixedFloats {
    fn write_f64<W: ?Sized + Write>(&mut self, writer: &mut W, value: f64) -> io::Result<()> {
        write!(writer, "{value:.16e}")
    }

    fn write_f32<W: ?Sized + Write>(&mut self, writer: &mut W, value: f32) -> io::Result<()> {
        self.write_f64(writer, value as f64)
    }
}

pub fn render_json(value: &Value) -> String {
    use serde::Serialize;
    let mut out = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut out, FixedFloats);
    value.serialize(&mut ser).expect("in-memory serialization");
    out.push(b'\n');
    String::from_utf8(out).expect("JSON output is UTF-8")
}

pub fn format_float(x: f64) -> String {
    if x.is_nan() {
        "nan".into()
    } else if x.is_infinite() {
        if x > 0.0 { "inf".into() } else { "-inf".into() }
    } else {
        format!("{x:.16e}")
    }
}

fn mat(m: &Matrix4<f64>) -> Value {
    Value::Array(
        (0..4)
            .map(|i| Value::Array((0..4).map(|j| json!(m[(i, j)])).collect()))
            .collect(),
    )
}

fn params_json(p: &ParamVector) -> Value {
    json!({"phi0": p.phi0(), "phi": p.phi(), "psi": p.psi(), "omega": p.omega()})
}

fn bounds_json(b: &BoundsReport) -> Value {
    json!({
        "per_param": b.per_param.to_vec(),
        "scalar_bound": b.scalar_bound,
        "condition_number": b.condition_number,
        "singular": b.singular,
        "eigenvalues": b.eigenvalues.to_vec(),
    })
}

fn qfim_json(q: &Qfim) -> Value {
    json!({"h_d": mat(q.h_d()), "h_gamma": mat(q.h_gamma()), "total": mat(q.total())})
}

fn probe_json(p: &Probe) -> Value {
    match p {
        Probe::Tmss(t) => json!({
            "family": "tmss", "r": t.r(), "theta": t.theta(),
            "alpha1": t.alpha1_mag(), "alpha2": t.alpha2_mag(),
            "beta1": t.beta1(), "beta2": t.beta2(),
        }),
        Probe::Smss(s) => json!({
            "family": "smss", "r1": s.r1(), "r2": s.r2(),
            "theta1": s.theta1(), "theta2": s.theta2(),
            "alpha1": s.alpha1_mag(), "alpha2": s.alpha2_mag(),
            "beta1": s.beta1(), "beta2": s.beta2(),
        }),
    }
}

fn design_json(d: &ProbeDesign) -> Value {
    json!({
        "family": match d.family { ProbeFamily::Tmss => "tmss", ProbeFamily::Smss => "smss" },
        "n_s": d.budget.n_s(), "n_c": d.budget.n_c(),
        "tau": d.budget.tau(), "eta": d.budget.eta(),
        "theta": d.phases.theta, "theta1": d.phases.theta1, "theta2": d.phases.theta2,
        "beta1": d.phases.beta1, "beta2": d.phases.beta2,
        "beam_splitter": d.beam_splitter,
    })
}

fn envelope(command: &str, body: Value) -> Value {
    let mut v = json!({"schema_version": SCHEMA_VERSION, "command": command});
    if let (Value::Object(dst), Value::Object(src)) = (&mut v, body) {
        dst.extend(src);
    }
    v
}

pub const CSV_COLUMNS: [&str; 10] = [
    "tr_inv",
    "bound_phi0",
    "bound_phi",
    "bound_psi",
    "bound_omega",
    "singular",
    "eig_1",
    "eig_2",
    "eig_3",
    "eig_4",
];

pub fn sweep_csv(variable: SweptVariable, rows: &[SweepRow]) -> String {
    let mut out = String::new();
    out.push_str(variable.name());
    for c in CSV_COLUMNS {
        out.push(',');
        out.push_str(c);
    }
    out.push('\n');
    for row in rows {
        let mut cells = vec![format_float(row.value), format_float(row.scalar_bound)];
        cells.extend(row.per_param.iter().map(|&x| format_float(x)));
        cells.push(row.singular.to_string());
        cells.extend(row.eigenvalues.iter().map(|&x| format_float(x)));
        out.push_str(&cells.join(","));
        out.push('\n');
    }
    out
}

// ---------------------------------------------------------------- commands

/// Rendered output of a command.
pub struct Output {
    pub data: String,
    pub format: Format,
}

pub fn compute(cfg: &RunConfig) -> Result<Value, CliError> {
    let params = cfg.param_vector();
    let (probe, input, bs) = match (cfg.explicit_probe()?, cfg.design()?) {
        (Some(p), None) => (p, crate::interferometer::ComplexMatrix2::identity(), false),
        (None, Some(d)) => (d.probe(), d.input_unitary(), d.beam_splitter),
        (Some(_), Some(_)) => return Err(CliError::Config("give only one of `probe` and `design`".into())),
        (None, None) => return Err(CliError::Config("missing key `probe` or `design`".into())),
    };
    let state = probe.state();
    let q = qfim_through(&state, &params, &input).map_err(numeric_err)?;
    let phys = check_physical(&state);
    let mut closed = serde_json::Map::new();
    if !bs {
        match &probe {
            Probe::Tmss(t) => {
                let hg = closed_form_hgamma_tmss(t.r(), params.omega());
                let hd = closed_form_hd_tmss(t, &params);
                let flipped = closed_form_hd_tmss_flipped_psi_term(t, &params);
                closed.insert("h_gamma".into(), mat(&hg));
                closed.insert("h_gamma_max_abs_deviation".into(), json!((hg - q.h_gamma()).amax()));
                closed.insert("h_d".into(), mat(&hd));
                closed.insert("h_d_max_abs_deviation".into(), json!((hd - q.h_d()).amax()));
                closed.insert(
                    "h_d_flipped_psi_term_max_abs_deviation".into(),
                    json!((flipped - q.h_d()).amax()),
                );
            }
            Probe::Smss(s) => {
                let aligned = (s.theta1() - FRAC_PI_2).abs() < 1e-15 && s.theta2() == 0.0;
                if aligned {
                    let hg = closed_form_hgamma_smss_general(s.r1(), s.r2(), params.omega(), params.phi());
                    closed.insert("h_gamma".into(), mat(&hg));
                    closed.insert("h_gamma_max_abs_deviation".into(), json!((hg - q.h_gamma()).amax()));
                }
            }
        }
    }
    Ok(json!({
        "probe": probe_json(&probe),
        "beam_splitter": bs,
        "params": params_json(&params),
        "mean_photon_number": mean_photon_number(&state),
        "physicality": {
            "symmetry_defect": phys.symmetry_defect,
            "min_uncertainty_eigenvalue": phys.min_uncertainty_eigenvalue,
            "symplectic_eigenvalues": phys.symplectic_eigenvalues.to_vec(),
            "pure": phys.pure,
        },
        "qfim": qfim_json(&q),
        "bounds": bounds_json(&q.bounds()),
        "closed_form": Value::Object(closed),
    }))
}

pub fn sweep_spec(cfg: &RunConfig) -> Result<SweepSpec, CliError> {
    let s = cfg
        .sweep
        .as_ref()
        .ok_or_else(|| CliError::Config("missing key `sweep`".into()))?;
    let design = cfg.require_design()?;
    let variable = match s.variable {
        VariableName::N => SweptVariable::N,
        VariableName::Tau => SweptVariable::Tau,
        VariableName::Eta => SweptVariable::Eta,
        VariableName::Omega => SweptVariable::Omega,
        VariableName::PhaseMismatch => SweptVariable::PhaseMismatch,
    };
    let raw = match (&s.values, &s.spacing) {
        (Some(v), None) => v.clone(),
        (None, Some(sp)) => {
            if sp.count == 0 {
                return Err(config_err("sweep.spacing.count", "must be positive"));
            }
            match sp.kind {
                SpacingKind::Log => {
                    if !(sp.from > 0.0 && sp.to > 0.0) {
                        return Err(config_err("sweep.spacing", "log spacing needs positive bounds"));
                    }
                    log_grid(sp.from, sp.to, sp.count)
                }
                SpacingKind::Linear => (0..sp.count)
                    .map(|i| {
                        if sp.count == 1 {
                            sp.from
                        } else {
                            sp.from + (sp.to - sp.from) * i as f64 / (sp.count - 1) as f64
                        }
                    })
                    .collect(),
            }
        }
        _ => return Err(config_err("sweep", "give exactly one of `values` and `spacing`")),
    };
    let angular = matches!(variable, SweptVariable::Omega | SweptVariable::PhaseMismatch);
    let a = cfg.angles();
    let grid = if angular { raw.iter().map(|&x| a.get(x)).collect() } else { raw };
    let spec = SweepSpec {
        design,
        variable,
        grid,
        params: cfg.param_vector(),
        matrix: match s.matrix {
            MatrixName::Total => MatrixSelector::Total,
            MatrixName::Displacement => MatrixSelector::Displacement,
            MatrixName::Covariance => MatrixSelector::Covariance,
        },
    };
    spec.validate().map_err(|e| config_err("sweep", e))?;
    Ok(spec)
}

pub fn sweep_rows(cfg: &RunConfig) -> Result<(SweptVariable, Vec<SweepRow>), CliError> {
    let spec = sweep_spec(cfg)?;
    let rows = run_sweep(&spec).map_err(numeric_err)?;
    Ok((spec.variable, rows))
}

fn sweep_json(variable: SweptVariable, rows: &[SweepRow]) -> Value {
    json!({
        "variable": variable.name(),
        "rows": rows.iter().map(|r| json!({
            "value": r.value,
            "tr_inv": r.scalar_bound,
            "per_param": r.per_param.to_vec(),
            "eigenvalues": r.eigenvalues.to_vec(),
            "singular": r.singular,
            "failed": r.failed,
        })).collect::<Vec<_>>(),
    })
}

fn design_variable(name: &str) -> Result<DesignVariable, CliError> {
    Ok(match name {
        "theta" => DesignVariable::Theta,
        "theta1" => DesignVariable::Theta1,
        "theta2" => DesignVariable::Theta2,
        "beta1" => DesignVariable::Beta1,
        "beta2" => DesignVariable::Beta2,
        "tau" => DesignVariable::Tau,
        "eta" => DesignVariable::Eta,
        other => return Err(config_err("optimize.free", format!("unknown variable `{other}`"))),
    })
}

fn optimization_json(r: &OptimizationResult) -> Value {
    json!({
        "free": r.free.iter().map(|v| v.name()).collect::<Vec<_>>(),
        "values": r.values(),
        "best": design_json(&r.best),
        "scalar_bound": r.scalar_bound,
        "best_grid_bound": r.best_grid_bound,
        "all_singular": r.all_singular,
        "evaluations": r.evaluations,
        "resolution": r.resolution,
        "trace": r.trace.iter().map(|t| json!({
            "round": t.round,
            "variable": t.variable.map(|v| v.name()),
            "values": t.values,
            "scalar_bound": t.scalar_bound,
        })).collect::<Vec<_>>(),
    })
}

pub fn optimize(cfg: &RunConfig) -> Result<Value, CliError> {
    let design = cfg.require_design()?;
    let o = cfg
        .optimize
        .as_ref()
        .ok_or_else(|| CliError::Config("missing key `optimize`".into()))?;
    let free = o
        .free
        .iter()
        .map(|s| design_variable(s))
        .collect::<Result<Vec<_>, _>>()?;
    let defaults = SearchSettings::default();
    let settings = SearchSettings {
        angle_points: o.angle_points.unwrap_or(defaults.angle_points),
        weight_points: o.weight_points.unwrap_or(defaults.weight_points),
        rounds: o.rounds.unwrap_or(defaults.rounds),
        ..defaults
    };
    if settings.angle_points < 1 || settings.weight_points < 2 {
        return Err(config_err("optimize", "grids need at least 1 angle point and 2 weight points"));
    }
    let params = cfg.param_vector();
    let result = optimize_probe(&design, &params, &free, &settings).map_err(|e| config_err("optimize", e))?;
    let mut body = json!({
        "design": design_json(&design),
        "params": params_json(&params),
        "result": optimization_json(&result),
    });
    if design.family == ProbeFamily::Smss {
        let report = resolve_smss_displacement_phases(
            &design,
            &params,
            &[(FRAC_PI_2, 0.0), (FRAC_PI_2, FRAC_PI_2)],
            &settings,
        )
        .map_err(numeric_err)?;
        body["displacement_phase_candidates"] = json!({
            "candidates": report.candidates.iter().map(|&(b1, b2, s)| json!({
                "beta1": b1, "beta2": b2, "scalar_bound": s,
            })).collect::<Vec<_>>(),
            "winner": report.winner,
            "optimized": optimization_json(&report.optimized),
        });
    }
    Ok(body)
}

#[derive(Debug, Clone, PartialEq)]
pub struct OraclePoint {
    pub r: f64,
    pub omega: f64,
    pub cutoff: usize,
    pub norm_defect: f64,
    /// Oracle/Gaussian ratios on entries that are nonzero in the Gaussian
    /// matrix, per sector.
    pub gamma_ratios: Vec<((usize, usize), f64)>,
    pub d_ratios: Vec<((usize, usize), f64)>,
    /// Largest `|oracle − gaussian|` over the `φ` row of the covariance sector.
    pub jz_entry_deviation: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OracleSummary {
    pub points: Vec<OraclePoint>,
    pub gamma_ratio_mean: f64,
    pub gamma_ratio_spread: f64,
    pub d_ratio_mean: f64,
    pub d_ratio_spread: f64,
    pub constant: bool,
}

fn ratios(oracle: &Matrix4<f64>, gaussian: &Matrix4<f64>) -> Vec<((usize, usize), f64)> {
    let scale = gaussian.amax();
    let mut out = Vec::new();
    for i in 0..4 {
        for j in i..4 {
            if gaussian[(i, j)].abs() > 1e-6 * scale {
                out.push(((i, j), oracle[(i, j)] / gaussian[(i, j)]));
            }
        }
    }
    out
}

fn spread(values: impl Iterator<Item = f64> + Clone) -> (f64, f64) {
    let n = values.clone().count() as f64;
    if n == 0.0 {
        return (f64::NAN, 0.0);
    }
    let mean = values.clone().sum::<f64>() / n;
    let (lo, hi) = values.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)));
    (mean, (hi - lo) / mean.abs())
}

/// Generator-QFIM versus Gaussian-QFIM on an `(r, ω)` grid of TMSS probes.
pub fn oracle_check(cfg: &OracleConfig, params: &ParamVector, degrees: bool) -> Result<OracleSummary, CliError> {
    let a = Angles { degrees };
    let omegas: Vec<f64> = match &cfg.omega_values {
        Some(v) => v.iter().map(|&w| a.get(w)).collect(),
        None => vec![FRAC_PI_8, FRAC_PI_4, 3.0 * FRAC_PI_8],
    };
    if cfg.r_values.is_empty() || omegas.is_empty() {
        return Err(config_err("oracle", "grids must be nonempty"));
    }
    if !(cfg.tol > 0.0 && cfg.tol <= 1e-2) {
        return Err(config_err("oracle.tol", "must lie in (0, 1e-2]"));
    }
    let mut points = Vec::new();
    for &r in &cfg.r_values {
        for &omega in &omegas {
            let p = params.with_omega(omega);
            let probe = TmssProbe::new(r, a.get(cfg.theta), cfg.alpha1, cfg.alpha2, a.get(cfg.beta1), a.get(cfg.beta2))
                .map_err(|e| config_err("oracle", e))?;
            let full: Probe = probe.into();
            let bare: Probe = probe.without_displacement().into();
            let fock = |e: FockError| match e {
                FockError::CutoffExceeded { .. } => CliError::Cutoff(e.to_string()),
                other => CliError::Numeric(other.to_string()),
            };
            let cutoff = cutoff_for_with_max(&full, cfg.tol, cfg.max_cutoff)
                .map_err(fock)?
                .max(cutoff_for_with_max(&bare, cfg.tol, cfg.max_cutoff).map_err(fock)?);
            let ops = FockOperators::new(cutoff).map_err(fock)?;
            let generators = schwinger_generators(&p, &ops);
            let full_state = prepare_state(&full, cutoff).map_err(fock)?;
            let bare_state = prepare_state(&bare, cutoff).map_err(fock)?;
            let h_full = generator_qfim(&full_state, &generators);
            let h_gamma = generator_qfim(&bare_state, &generators);
            let h_d = h_full - h_gamma;
            let q = qfim_through(&full.state(), &p, &crate::interferometer::ComplexMatrix2::identity())
                .map_err(numeric_err)?;
            points.push(OraclePoint {
                r,
                omega,
                cutoff,
                norm_defect: full_state.norm_defect().max(bare_state.norm_defect()),
                gamma_ratios: ratios(&h_gamma, q.h_gamma()),
                d_ratios: ratios(&h_d, q.h_d()),
                jz_entry_deviation: (0..4)
                    .map(|j| (h_gamma[(1, j)] - q.h_gamma()[(1, j)]).abs())
                    .fold(0.0, f64::max),
            });
        }
    }
    let g = points.iter().flat_map(|p| p.gamma_ratios.iter().map(|x| x.1)).collect::<Vec<_>>();
    let d = points.iter().flat_map(|p| p.d_ratios.iter().map(|x| x.1)).collect::<Vec<_>>();
    let (gamma_ratio_mean, gamma_ratio_spread) = spread(g.iter().copied());
    let (d_ratio_mean, d_ratio_spread) = spread(d.iter().copied());
    Ok(OracleSummary {
        points,
        gamma_ratio_mean,
        gamma_ratio_spread,
        d_ratio_mean,
        d_ratio_spread,
        constant: gamma_ratio_spread < RATIO_SPREAD_TOLERANCE && d_ratio_spread < RATIO_SPREAD_TOLERANCE,
    })
}

fn oracle_json(s: &OracleSummary) -> Value {
    let ratio_list = |v: &[((usize, usize), f64)]| {
        v.iter()
            .map(|&((i, j), x)| json!({"row": i, "col": j, "ratio": x}))
            .collect::<Vec<_>>()
    };
    json!({
        "points": s.points.iter().map(|p| json!({
            "r": p.r, "omega": p.omega, "cutoff": p.cutoff, "norm_defect": p.norm_defect,
            "covariance_ratios": ratio_list(&p.gamma_ratios),
            "displacement_ratios": ratio_list(&p.d_ratios),
            "jz_entry_deviation": p.jz_entry_deviation,
        })).collect::<Vec<_>>(),
        "covariance_ratio_mean": s.gamma_ratio_mean,
        "covariance_ratio_spread": s.gamma_ratio_spread,
        "displacement_ratio_mean": s.d_ratio_mean,
        "displacement_ratio_spread": s.d_ratio_spread,
        "spread_tolerance": RATIO_SPREAD_TOLERANCE,
        "constant": s.constant,
    })
}

pub fn equivalence(cfg: &RunConfig) -> Result<Value, CliError> {
    let design = cfg.require_design()?;
    if design.family != ProbeFamily::Smss {
        return Err(config_err("design.family", "equivalence needs an smss design"));
    }
    let params = cfg.param_vector();
    let rs = cfg
        .equivalence
        .as_ref()
        .map(|e| e.r_values.clone())
        .unwrap_or_else(default_equivalence_r);
    let mut reports = Vec::new();
    for r in rs {
        let rep = smss_tmss_equivalence(r, &params, &design).map_err(|e| config_err("equivalence", e))?;
        reports.push(json!({
            "r": rep.r,
            "tmss_theta": rep.tmss_theta,
            "covariance_deviation": rep.covariance_deviation,
            "h_gamma_deviation": rep.hgamma_deviation,
            "image_total_relative_deviation": rep.image_total_deviation,
            "canonical_total_normalized_deviation": rep.canonical_total_deviation,
            "canonical_h_gamma_normalized_deviation": rep.canonical_hgamma_deviation,
        }));
    }
    Ok(json!({
        "design": design_json(&design),
        "params": params_json(&params),
        "reports": reports,
    }))
}

/// Runs `command` on a parsed configuration and renders the result.
pub fn execute(command: &Command, cfg: &RunConfig) -> Result<Output, CliError> {
    let (name, args) = command_parts(command);
    let format = args.format.unwrap_or(match command {
        Command::Sweep(_) => Format::Csv,
        _ => Format::Json,
    });
    if format == Format::Csv && !matches!(command, Command::Sweep(_)) {
        return Err(CliError::Config(format!("`{name}` only writes json")));
    }
    let body = match command {
        Command::Compute(_) => compute(cfg)?,
        Command::Sweep(_) => {
            let (variable, rows) = sweep_rows(cfg)?;
            if format == Format::Csv {
                return Ok(Output {
                    data: sweep_csv(variable, &rows),
                    format,
                });
            }
            sweep_json(variable, &rows)
        }
        Command::OracleCheck(_) => {
            let oc = cfg.oracle.clone().unwrap_or_default();
            oracle_json(&oracle_check(&oc, &cfg.param_vector(), cfg.degrees)?)
        }
        Command::Optimize(_) => optimize(cfg)?,
        Command::Equivalence(_) => equivalence(cfg)?,
    };
    Ok(Output {
        data: render_json(&envelope(name, body)),
        format,
    })
}

fn command_parts(command: &Command) -> (&'static str, &CommonArgs) {
    match command {
        Command::Compute(a) => ("compute", a),
        Command::Sweep(a) => ("sweep", a),
        Command::OracleCheck(a) => ("oracle-check", a),
        Command::Optimize(a) => ("optimize", a),
        Command::Equivalence(a) => ("equivalence", a),
    }
}

fn read_config(path: &str) -> Result<String, CliError> {
    if path == "-" {
        let mut s = String::new();
        io::stdin()
            .read_to_string(&mut s)
            .map_err(|e| config_err("--config", e))?;
        Ok(s)
    } else {
        fs::read_to_string(path).map_err(|e| config_err("--config", format!("{path}: {e}")))
    }
}

fn sidecar_path(out: &Path) -> PathBuf {
    let mut name = out.as_os_str().to_owned();
    name.push(".meta.json");
    PathBuf::from(name)
}

pub fn run(cli: &Cli) -> Result<(), CliError> {
    let (name, args) = command_parts(&cli.command);
    let cfg = RunConfig::parse(&read_config(&args.config)?)?;
    let output = execute(&cli.command, &cfg)?;
    match &args.out {
        Some(path) => {
            fs::write(path, &output.data)?;
            let stamp = SystemTime::now()
                .duration_since(UNIX_EPOCH)
                .map(|d| d.as_secs())
                .unwrap_or(0);
            let meta = json!({
                "schema_version": SCHEMA_VERSION,
                "tool": env!("CARGO_PKG_NAME"),
                "version": env!("CARGO_PKG_VERSION"),
                "command": name,
                "config": args.config,
                "format": output.format.name(),
                "created_unix": stamp,
            });
            fs::write(sidecar_path(path), render_json(&meta))?;
        }
        None => io::stdout().write_all(output.data.as_bytes())?,
    }
    Ok(())
}
