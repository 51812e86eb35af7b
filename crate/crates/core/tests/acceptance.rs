use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, PI, TAU};
use std::panic::{self, AssertUnwindSafe};
use std::path::Path;
use std::process::{Command, ExitCode};
use std::time::{Duration, Instant};

use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use twomode_qfim::cli::{oracle_check, OracleConfig};
use twomode_qfim::gaussian::{Probe, ResourceBudget, SmssProbe, TmssProbe};
use twomode_qfim::interferometer::ParamVector;
use twomode_qfim::probe_design::{
    angle_distance_to_zero, log_grid, loglog_slope, n2_coefficient_rank, optimize_probe,
    run_sweep, smss_tmss_equivalence, DesignVariable, MatrixSelector, ProbeDesign, ProbeFamily,
    ProbePhases, SearchSettings, SweepSpec, SweptVariable, N2_GRID,
};
use twomode_qfim::qfim::{
    asymptotic_bounds_tmss, closed_form_hd_tmss, closed_form_hd_tmss_flipped_psi_term,
    closed_form_hgamma_smss, closed_form_hgamma_tmss, qcrb_bounds, qfim_numeric, PhiSectorWeight,
};

type Outcome = Result<String, String>;

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn linspace(a: f64, b: f64, n: usize) -> Vec<f64> {
    (0..n).map(|i| a + (b - a) * i as f64 / (n - 1) as f64).collect()
}

fn tmss_design(n: f64) -> ProbeDesign {
    ProbeDesign {
        family: ProbeFamily::Tmss,
        phases: ProbePhases::default(),
        budget: ResourceBudget::balanced(n).unwrap(),
        beam_splitter: false,
    }
}

fn beam_splitter_point() -> ParamVector {
    ParamVector::new(0.0, 0.0, 0.0, FRAC_PI_4)
}

fn squeezing_only_grid() -> Vec<(f64, ParamVector, f64)> {
    let mut rng = StdRng::seed_from_u64(1);
    let mut out = Vec::new();
    for r in linspace(0.1, 1.0, 5) {
        for omega in linspace(PI / 16.0, 7.0 * PI / 16.0, 5) {
            let p = ParamVector::new(rng.gen_range(0.0..TAU), rng.gen_range(0.0..TAU), rng.gen_range(0.0..TAU), omega);
            out.push((r, p, rng.gen_range(0.0..TAU)));
        }
    }
    out
}

fn criterion_1() -> Outcome {
    let mut worst = 0.0f64;
    for (r, p, theta) in squeezing_only_grid() {
        let probe: Probe = TmssProbe::vacuum_squeezed(r, theta).unwrap().into();
        let q = qfim_numeric(&probe, &p).map_err(|e| e.to_string())?;
        worst = worst.max((q.h_gamma() - closed_form_hgamma_tmss(r, p.omega())).amax());
    }
    check(worst < 1e-9, format!("max |H^Γ − closed form| = {worst:.3e} over 25 probes"))
}

fn criterion_2() -> Outcome {
    let h = 0.1;
    let (mut entry, mut slope) = (0.0f64, 0.0f64);
    for (r, p, theta) in squeezing_only_grid() {
        let probe: Probe = TmssProbe::vacuum_squeezed(r, theta).unwrap().into();
        let hg = |phi: f64| *qfim_numeric(&probe, &p.with_phi(phi)).unwrap().h_gamma();
        entry = entry.max(hg(p.phi())[(1, 1)].abs());
        slope = slope.max(((hg(p.phi() + h) - hg(p.phi() - h)) / (2.0 * h)).amax());
    }
    check(
        entry < 1e-12 && slope < 1e-10,
        format!("max (H^Γ)_φφ = {entry:.3e}, max |∂H^Γ/∂φ| = {slope:.3e}"),
    )
}

fn criterion_3() -> Outcome {
    let mut rng = StdRng::seed_from_u64(3);
    let (mut worst, mut flipped) = (0.0f64, 0.0f64);
    for _ in 0..200 {
        let probe = TmssProbe::new(
            rng.gen_range(0.0..1.0),
            rng.gen_range(0.0..TAU),
            rng.gen_range(0.0..1.5),
            rng.gen_range(0.0..1.5),
            rng.gen_range(0.0..TAU),
            rng.gen_range(0.0..TAU),
        )
        .unwrap();
        let p = ParamVector::new(
            rng.gen_range(0.0..TAU),
            rng.gen_range(0.0..TAU),
            rng.gen_range(0.0..TAU),
            rng.gen_range(0.0..FRAC_PI_2),
        );
        let q = qfim_numeric(&probe.into(), &p).map_err(|e| e.to_string())?;
        worst = worst.max((q.h_d() - closed_form_hd_tmss(&probe, &p)).amax());
        flipped = flipped.max((q.h_d() - closed_form_hd_tmss_flipped_psi_term(&probe, &p)).amax());
    }
    let mut special = 0.0f64;
    for (r, alpha) in [(0.3, 0.7), (0.8, 1.2), (1.1, 0.4)] {
        let probe = TmssProbe::new(r, 0.0, alpha, alpha, 0.0, 0.0).unwrap();
        let q = qfim_numeric(&probe.into(), &ParamVector::new(0.2, 0.9, 1.7, 0.6)).unwrap();
        special = special.max((q.h_d()[(1, 1)] - 2.0 * alpha * alpha * (2.0 * r).exp()).abs());
    }
    check(
        worst < 1e-9 && special < 1e-10,
        format!(
            "max |H^d − element list| = {worst:.3e} (flipped sin4ω sign gives {flipped:.3e}), phase-matched H^d_φφ error = {special:.3e}"
        ),
    )
}

fn criterion_4() -> Outcome {
    let n = 200.0;
    let ns = n / 2.0;
    let omega = FRAC_PI_4;
    let q = tmss_design(n).qfim(&beam_splitter_point()).map_err(|e| e.to_string())?;
    let b = q.bounds().per_param;
    let s11 = b[0] * 8.0 * ns * ns;
    let s44 = b[3] * 8.0 * ns * ns;
    let s33 = b[2] * 2.0 * ns * ns * (2.0 * omega).sin().powi(2);
    let single = b[1] / asymptotic_bounds_tmss(ns, ns, omega, PhiSectorWeight::Single)[1];
    let double = b[1] / asymptotic_bounds_tmss(ns, ns, omega, PhiSectorWeight::Double)[1];
    let within = |x: f64| (0.95..=1.05).contains(&x);
    let winner = match (within(single), within(double)) {
        (true, false) => "single weight",
        (false, true) => "double weight",
        _ => "none",
    };
    check(
        within(s11) && within(s44) && within(s33) && within(single) != within(double),
        format!(
            "(1,1) {s11:.4}, (3,3) {s33:.4}, (4,4) {s44:.4}; φ-sector ratio single {single:.4}, double {double:.4}; winner: {winner}"
        ),
    )
}

fn criterion_5() -> Outcome {
    let spec = SweepSpec {
        design: tmss_design(10.0),
        variable: SweptVariable::N,
        grid: log_grid(10.0, 1000.0, 7),
        params: beam_splitter_point(),
        matrix: MatrixSelector::Total,
    };
    let rows = run_sweep(&spec).map_err(|e| e.to_string())?;
    let ns: Vec<f64> = rows.iter().map(|r| r.value).collect();
    let tr: Vec<f64> = rows.iter().map(|r| r.scalar_bound).collect();
    let slope = loglog_slope(&ns, &tr);
    let last = rows.last().unwrap();
    let n = last.value;
    let numeric = n * n * (last.per_param[0] + last.per_param[2] + last.per_param[3]);
    let a = asymptotic_bounds_tmss(n / 2.0, n / 2.0, FRAC_PI_4, PhiSectorWeight::Double);
    let asymptotic = n * n * (a[0] + a[2] + a[3]);
    let ratio = numeric / asymptotic;
    check(
        (-2.1..=-1.9).contains(&slope) && (ratio - 1.0).abs() <= 0.05,
        format!("slope {slope:.4}; N² partial sum at N = {n}: {numeric:.5} vs {asymptotic:.5} (ratio {ratio:.4})"),
    )
}

fn criterion_6() -> Outcome {
    let start = Instant::now();
    let summary = oracle_check(&OracleConfig::default(), &ParamVector::new(0.3, 0.8, 1.4, FRAC_PI_4), false)
        .map_err(|e| e.to_string())?;
    let elapsed = start.elapsed();
    let jz = summary.points.iter().map(|p| p.jz_entry_deviation).fold(0.0, f64::max);
    check(
        summary.constant && jz < 1e-9 && elapsed < Duration::from_secs(300),
        format!(
            "covariance ratio {:.6} (spread {:.2e}), displacement ratio {:.6} (spread {:.2e}), φ-row deviation {jz:.2e}, {:.1} s",
            summary.gamma_ratio_mean,
            summary.gamma_ratio_spread,
            summary.d_ratio_mean,
            summary.d_ratio_spread,
            elapsed.as_secs_f64()
        ),
    )
}

fn criterion_7() -> Outcome {
    let mut closed = 0.0f64;
    let mut rank_ok = true;
    let mut rng = StdRng::seed_from_u64(7);
    for r in [0.2, 0.5, 0.9] {
        let probe = SmssProbe::new(r, r, FRAC_PI_2, 0.0, 0.0, 0.0, 0.0, 0.0).unwrap();
        let p = ParamVector::new(rng.gen_range(0.0..TAU), rng.gen_range(0.0..TAU), rng.gen_range(0.0..TAU), rng.gen_range(0.1..1.4));
        let q = qfim_numeric(&probe.into(), &p).map_err(|e| e.to_string())?;
        let cf = closed_form_hgamma_smss(r, p.omega(), p.phi());
        closed = closed.max((q.h_gamma() - cf).amax());
        let eig = qcrb_bounds(q.h_gamma()).eigenvalues;
        rank_ok &= eig.iter().filter(|&&e| e > 1e-9 * eig[3]).count() == 3;
    }
    let etas = linspace(0.0, 1.0, 11);
    let mut coefficients = Vec::new();
    let mut small_ok = true;
    for &eta in &etas {
        let design = ProbeDesign {
            family: ProbeFamily::Smss,
            phases: ProbePhases::default(),
            budget: ResourceBudget::new(50.0, 50.0, 0.5, eta).unwrap(),
            beam_splitter: false,
        };
        let a = n2_coefficient_rank(&design, &beam_splitter_point(), MatrixSelector::Covariance)
            .map_err(|e| e.to_string())?;
        small_ok &= a.coefficients[0] <= a.threshold;
        coefficients.push(a.coefficients);
    }
    let argmax: Vec<f64> = (1..4)
        .map(|k| {
            let best = (0..etas.len())
                .max_by(|&i, &j| coefficients[i][k].total_cmp(&coefficients[j][k]))
                .unwrap();
            etas[best]
        })
        .collect();
    let peaked = argmax.iter().filter(|&&e| (e - 0.5).abs() <= 0.1 + 1e-12).count();
    check(
        closed < 1e-9 && rank_ok && small_ok && peaked >= 2,
        format!(
            "max |H^Γ − closed form| = {closed:.3e}, rank 3: {rank_ok}, smallest N² coefficient below threshold for all η: {small_ok}, η maximizing the other three: {argmax:?}"
        ),
    )
}

fn criterion_8() -> Outcome {
    let design = ProbeDesign {
        family: ProbeFamily::Smss,
        phases: ProbePhases {
            beta1: FRAC_PI_2,
            ..ProbePhases::default()
        },
        budget: ResourceBudget::balanced(100.0).unwrap(),
        beam_splitter: false,
    };
    let (mut cov, mut total) = (0.0f64, 0.0f64);
    for r in [0.2, 0.5, 1.0] {
        let rep = smss_tmss_equivalence(r, &beam_splitter_point(), &design).map_err(|e| e.to_string())?;
        cov = cov.max(rep.covariance_deviation);
        total = total.max(rep.canonical_total_deviation);
    }
    check(
        cov < 1e-10 && total < 0.05,
        format!("max covariance deviation {cov:.3e}, total QFIM deviation at N = 100: {total:.3e}"),
    )
}

fn criterion_9() -> Outcome {
    let p = beam_splitter_point();
    let with = |theta: f64, tau: f64| {
        let mut d = tmss_design(100.0);
        d.phases.theta = theta;
        d.budget = d.budget.with_tau(tau).unwrap();
        d
    };
    let mut counts = Vec::new();
    for d in [with(0.0, 0.5), with(PI / 3.0, 0.5), with(0.0, 0.3)] {
        counts.push(n2_coefficient_rank(&d, &p, MatrixSelector::Displacement).map_err(|e| e.to_string())?.count);
    }
    let mismatched = with(PI, 0.5);
    let mut bounds = Vec::new();
    for &n in &N2_GRID {
        let mut d = mismatched;
        d.budget = ResourceBudget::new(0.5 * n, 0.5 * n, 0.5, 0.5).unwrap();
        bounds.push(d.qfim(&p).map_err(|e| e.to_string())?.bounds().per_param[1]);
    }
    let slope = loglog_slope(&N2_GRID, &bounds);
    check(
        counts == [1, 2, 2] && slope > -1.5,
        format!("counts {counts:?}; θ − β₁ − β₂ = π: φ bound log-log slope {slope:.4}"),
    )
}

fn criterion_10() -> Outcome {
    let design = tmss_design(5.0);
    let p = beam_splitter_point();
    let free = [DesignVariable::Theta, DesignVariable::Beta1, DesignVariable::Beta2, DesignVariable::Tau];
    let res = optimize_probe(&design, &p, &free, &SearchSettings::default()).map_err(|e| e.to_string())?;
    let ph = res.best.phases;
    let mismatch = angle_distance_to_zero(ph.theta - ph.beta1 - ph.beta2);
    let phase_tol = res.resolution[0] + res.resolution[1] + res.resolution[2];
    let tau = res.best.budget.tau();
    let spec = SweepSpec {
        design,
        variable: SweptVariable::Tau,
        grid: linspace(0.0, 1.0, 21),
        params: p,
        matrix: MatrixSelector::Total,
    };
    let rows = run_sweep(&spec).map_err(|e| e.to_string())?;
    let vals: Vec<f64> = rows.iter().map(|r| r.scalar_bound).collect();
    let argmin = (0..vals.len()).min_by(|&i, &j| vals[i].total_cmp(&vals[j])).unwrap();
    let falling = vals[..=argmin].windows(2).all(|w| w[1] <= w[0]);
    let rising = vals[argmin..].windows(2).all(|w| w[1] >= w[0]);
    let interior = argmin > 0 && argmin < vals.len() - 1;
    let tau_min = rows[argmin].value;
    check(
        mismatch <= phase_tol
            && (tau - 0.5).abs() <= res.resolution[3]
            && interior
            && falling
            && rising
            && (tau_min - 0.5).abs() <= 0.05 + 1e-12,
        format!(
            "θ − β₁ − β₂ = {mismatch:.2e} (mod 2π), τ = {tau:.6}, bound {:.6}; sweep minimum at τ = {tau_min} ({:.6})",
            res.scalar_bound, vals[argmin]
        ),
    )
}

fn run_cli(args: &[&str], out: &Path) -> Result<Vec<u8>, String> {
    let status = Command::new(env!("CARGO_BIN_EXE_twomode-qfim"))
        .args(args)
        .arg("--out")
        .arg(out)
        .status()
        .map_err(|e| e.to_string())?;
    if !status.success() {
        return Err(format!("{args:?} exited with {status}"));
    }
    std::fs::read(out).map_err(|e| e.to_string())
}

fn criterion_11() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let configs = [
        ("compute", r#"{"probe": {"family": "tmss", "r": 0.5, "alpha1": 0.4, "alpha2": 0.3, "beta1": 0.2}, "params": {"phi0": 0.1, "phi": 0.2, "psi": 0.3, "omega": 0.6}}"#),
        ("sweep", r#"{"design": {"family": "tmss", "n": 10}, "sweep": {"variable": "N", "spacing": {"kind": "log", "from": 10, "to": 1000, "count": 7}}}"#),
        ("oracle-check", r#"{"oracle": {"r_values": [0.1, 0.2], "omega_values": [0.5]}}"#),
        ("optimize", r#"{"design": {"family": "tmss", "n": 5}, "optimize": {"free": ["theta", "beta1", "beta2", "tau"], "angle_points": 12, "weight_points": 11, "rounds": 2}}"#),
        ("equivalence", r#"{"design": {"family": "smss", "n": 100, "beta1": 1.5707963267948966}}"#),
    ];
    let mut identical = Vec::new();
    for (command, config) in configs {
        let path = dir.path().join(format!("{command}.json"));
        std::fs::write(&path, config).map_err(|e| e.to_string())?;
        let cfg = path.to_str().unwrap();
        let a = run_cli(&[command, "--config", cfg], &dir.path().join(format!("{command}.a")))?;
        let b = run_cli(&[command, "--config", cfg], &dir.path().join(format!("{command}.b")))?;
        if a != b {
            return Err(format!("`{command}` outputs differ"));
        }
        identical.push(command);
    }
    Ok(format!("byte-identical reruns: {}", identical.join(", ")))
}

fn main() -> ExitCode {
    let criteria: [(u32, fn() -> Outcome); 11] = [
        (1, criterion_1),
        (2, criterion_2),
        (3, criterion_3),
        (4, criterion_4),
        (5, criterion_5),
        (6, criterion_6),
        (7, criterion_7),
        (8, criterion_8),
        (9, criterion_9),
        (10, criterion_10),
        (11, criterion_11),
    ];
    let mut failures = 0;
    for (id, f) in criteria {
        let outcome = panic::catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|e| {
            Err(e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panicked".into()))
        });
        match outcome {
            Ok(detail) => println!("criterion {id:>2}: PASS  {detail}"),
            Err(detail) => {
                failures += 1;
                println!("criterion {id:>2}: FAIL  {detail}");
            }
        }
    }
    println!("acceptance: {} passed, {failures} failed", 11 - failures);
    if failures == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}

