//! The experiment pipeline: simulate, evaluate energies, audit, fit and
//! check, then write every artifact plus a manifest.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use mgt_core::energetics::{
    check_dissipation, conserved_f_critical, energy_series, fit_decay, sandwich_constants, theta_exchange_check,
    DecayFit, EnergyOptions, EnergySeries, SandwichConstants, DISSIPATION_ALLOWANCE, FIT_RESIDUAL_TOLERANCE,
};
use mgt_core::kernel_audit::{audit_kernel, AuditGrid, KernelReport, DEFAULT_TOLERANCE};
use mgt_core::kernels::KernelSpec;
use mgt_core::spectral_model::Regime;
use mgt_core::volterra_solver::{max_growth_rate, rho_convergence_study, solve_with, SolverOptions, Trajectory};
use mgt_core::Execution;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::config::{Check, Experiment, ExperimentConfig};
use crate::io;
use crate::CliError;

/// Relative drift allowed for the critical conserved functional.
pub const CONSERVATION_TOLERANCE: f64 = 1e-6;
/// Relative mismatch allowed between measured and predicted blow-up rates.
pub const GROWTH_RATE_TOLERANCE: f64 = 0.02;
/// C(dt/2) may exceed C(dt) by at most this factor plus `STABILITY_SLACK`.
pub const STABILITY_FACTOR: f64 = 2.0;
pub const STABILITY_SLACK: f64 = 1e-3;
/// Times at which the ρ → 0 limit identity is measured.
pub const LIMIT_TIMES: [f64; 3] = [1.0, 5.0, 10.0];

/// Resolved inputs of a simulate step, stored next to its trajectory.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunInfo {
    pub config: ExperimentConfig,
    pub seed: u64,
    pub rho: f64,
    pub base_dir: Option<PathBuf>,
}

impl RunInfo {
    pub fn experiment(&self) -> Result<Experiment, CliError> {
        self.config.validate(Some(self.seed), self.base_dir.as_deref())
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CheckResult {
    pub name: Check,
    pub passed: bool,
    pub detail: Value,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Manifest {
    pub version: String,
    pub seed: u64,
    pub config: ExperimentConfig,
    pub regime: Value,
    pub tolerances: BTreeMap<String, f64>,
    pub measured: BTreeMap<String, Value>,
    pub checks: Vec<CheckResult>,
    pub files: Vec<String>,
}

impl Manifest {
    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn check(&self, name: Check) -> Option<&CheckResult> {
        self.checks.iter().find(|c| c.name == name)
    }
}

fn tolerances() -> BTreeMap<String, f64> {
    BTreeMap::from([
        ("audit_relative".into(), DEFAULT_TOLERANCE),
        ("dissipation_allowance".into(), DISSIPATION_ALLOWANCE),
        ("dissipation_stability_factor".into(), STABILITY_FACTOR),
        ("dissipation_stability_slack".into(), STABILITY_SLACK),
        ("fit_residual".into(), FIT_RESIDUAL_TOLERANCE),
        ("conservation_drift".into(), CONSERVATION_TOLERANCE),
        ("growth_rate_relative".into(), GROWTH_RATE_TOLERANCE),
    ])
}

/// Solve with the experiment's data; blow-up outside the supercritical
/// regime is a numerical failure.
pub fn simulate(exp: &Experiment, rho: f64, dt: f64, exec: Execution) -> Result<Trajectory, CliError> {
    let opts = SolverOptions { execution: exec, ..Default::default() };
    let traj = solve_with(&exp.params, exp.kernel.clone(), &exp.spectrum, &exp.initial, rho, exp.config.t_end, dt, opts)?;
    if let Some(ev) = &traj.blowup {
        if exp.regime.regime != Regime::Supercritical {
            return Err(CliError::Numerical(format!(
                "blow-up at t = {} in the {:?} regime",
                ev.time, exp.regime.regime
            )));
        }
    }
    Ok(traj)
}

/// δ used by the audit and the dissipation check.
pub fn delta_for(exp: &Experiment) -> f64 {
    let alpha = exp.params.alpha;
    exp.config
        .delta
        .or_else(|| exp.kernel.certified_delta(alpha))
        .unwrap_or(0.5 * alpha)
}

pub fn audit(exp: &Experiment, exec: Execution) -> Result<Option<KernelReport>, CliError> {
    if exp.kernel.is_zero() {
        return Ok(None);
    }
    let grid = AuditGrid::for_kernel(exp.kernel.as_ref());
    let report =
        audit_kernel(exp.kernel.as_ref(), exp.params.alpha, delta_for(exp), Some(exp.params.gamma), &grid, exec)?;
    Ok(Some(report))
}

/// Rate of an exponential bound on g: analytic when it is known and verified
/// on the audit grid, fitted otherwise, infinite for g ≡ 0.
pub fn omega_g(exp: &Experiment, report: Option<&KernelReport>) -> Option<f64> {
    if exp.kernel.is_zero() {
        return Some(f64::INFINITY);
    }
    let r = report?;
    match r.exp_bound.analytic {
        Some(a) if a.holds && a.omega_g > 0.0 => Some(a.omega_g),
        _ => (r.exp_bound.ok && r.exp_bound.omega_g > 0.0).then_some(r.exp_bound.omega_g),
    }
}

fn series(traj: &Trajectory, stride: usize, omega_g: Option<f64>, exec: Execution) -> Result<EnergySeries, CliError> {
    Ok(energy_series(traj, EnergyOptions { stride, omega_g, execution: exec })?)
}

fn subsample(s: &EnergySeries, stride: usize) -> EnergySeries {
    let keep = |i: usize| i.is_multiple_of(stride) || i + 1 == s.points.len();
    EnergySeries {
        points: s.points.iter().enumerate().filter(|(i, _)| keep(*i)).map(|(_, p)| *p).collect(),
        lambda: s.lambda.as_ref().map(|l| l.iter().enumerate().filter(|(i, _)| keep(*i)).map(|(_, x)| *x).collect()),
        stride: s.stride * stride,
        ..s.clone()
    }
}

/// max |r| / dt² of the modal residual at 20 random interior steps.
fn residual_constant(traj: &Trajectory, seed: u64) -> Result<Option<f64>, CliError> {
    let len = traj.modes.iter().map(|m| m.v.len()).min().unwrap_or(0);
    if len < 3 {
        return Ok(None);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = 0.0f64;
    for _ in 0..20 {
        let n = rng.gen_range(1..len - 1);
        for j in 0..traj.n_modes() {
            worst = worst.max(traj.residual(j, n)?.abs());
        }
    }
    Ok(Some(worst / (traj.dt * traj.dt)))
}

fn growth_prediction(exp: &Experiment, lambda: f64) -> Option<f64> {
    let memory = match &exp.config.kernel {
        KernelSpec::Zero => None,
        KernelSpec::Exponential { k, nu, scale } => Some((k * scale.unwrap_or(1.0), *nu)),
        _ => return None,
    };
    Some(max_growth_rate(&exp.params, memory, lambda))
}

struct Outputs<'a> {
    dir: &'a Path,
    files: Vec<String>,
}

impl Outputs<'_> {
    fn path(&mut self, name: &str) -> PathBuf {
        self.files.push(name.to_string());
        self.dir.join(name)
    }
}

/// The full pipeline. Artifacts are written before the checks are judged, so
/// a failing run still leaves its evidence behind.
pub fn run_experiment(exp: &Experiment, out_dir: &Path, exec: Execution) -> Result<Manifest, CliError> {
    std::fs::create_dir_all(out_dir).map_err(|e| CliError::io(out_dir, e))?;
    let mut out = Outputs { dir: out_dir, files: Vec::new() };
    let cfg = &exp.config;
    let rho = cfg.main_rho();
    let mut measured: BTreeMap<String, Value> = BTreeMap::new();
    let mut checks = Vec::new();

    let report = audit(exp, exec)?;
    match &report {
        Some(r) => io::write_json(&out.path("audit.json"), r)?,
        None => io::write_json(&out.path("audit.json"), &json!({ "kernel": "zero", "checks": "not applicable" }))?,
    }
    let w_g = omega_g(exp, report.as_ref());
    measured.insert("omega_g".into(), json!(w_g.map(|w| if w.is_infinite() { json!("inf") } else { json!(w) })));
    let delta = delta_for(exp);
    measured.insert("delta".into(), json!(delta));

    let main = simulate(exp, rho, cfg.dt, exec)?;
    io::write_trajectory(&out.path("trajectory.csv"), &main)?;
    io::write_json(
        &out.path("events.json"),
        &json!({ "regime": exp.regime, "rho": rho, "blowup": main.blowup }),
    )?;
    io::write_json(
        &out.path("run.json"),
        &RunInfo { config: cfg.clone(), seed: exp.seed, rho, base_dir: exp.base_dir.clone() },
    )?;
    measured.insert("residual_constant".into(), json!(residual_constant(&main, exp.seed)?));

    let full = series(&main, 1, w_g, exec)?;
    io::write_energy(&out.path("energy.csv"), &subsample(&full, cfg.energy_stride))?;
    measured.insert("epsilon".into(), json!(full.epsilon));

    let plain = if rho > 0.0 { Some(simulate(exp, 0.0, cfg.dt, exec)?) } else { None };
    let plain_traj = plain.as_ref().unwrap_or(&main);
    let plain_series = if plain.is_some() { series(plain_traj, cfg.energy_stride, w_g, exec)? } else { subsample(&full, cfg.energy_stride) };
    if plain.is_some() {
        io::write_energy(&out.path("energy_unregularized.csv"), &plain_series)?;
    }
    let e_vals: Vec<f64> = plain_series.points.iter().map(|p| p.e).collect();
    let fit = fit_decay(&plain_series.times(), &e_vals);
    match &fit {
        Ok(f) => io::write_json(&out.path("fit.json"), f)?,
        Err(e) => io::write_json(&out.path("fit.json"), &json!({ "error": e.to_string() }))?,
    }
    if let Ok(f) = &fit {
        measured.insert("fit".into(), json!(f));
    }

    let sandwich = sandwich_constants(&full, exp.regime.kappa).ok();
    measured.insert("sandwich".into(), json!(sandwich));

    for &check in &cfg.checks {
        let result = match check {
            Check::Audit => check_audit(report.as_ref()),
            Check::Dissipation => check_dissipation_pair(exp, rho, delta, w_g, &full, exec)?,
            Check::Decay => check_decay(&fit, &e_vals, plain.as_ref().map(|_| &full), exp),
            Check::Conservation => check_conservation(&main)?,
            Check::Blowup => check_blowup(exp, &main),
            Check::Sandwich => check_sandwich(sandwich, &full),
            Check::Convergence => check_convergence(exp, plain_traj, exec, &mut out)?,
        };
        checks.push(result);
    }

    let manifest = Manifest {
        version: env!("CARGO_PKG_VERSION").to_string(),
        seed: exp.seed,
        config: cfg.clone(),
        regime: json!(exp.regime),
        tolerances: tolerances(),
        measured,
        checks,
        files: {
            let mut f = out.files.clone();
            f.push("manifest.json".into());
            f
        },
    };
    io::write_json(&out_dir.join("manifest.json"), &manifest)?;
    Ok(manifest)
}

fn check_audit(report: Option<&KernelReport>) -> CheckResult {
    match report {
        None => CheckResult { name: Check::Audit, passed: true, detail: json!("g = 0") },
        Some(r) => CheckResult {
            name: Check::Audit,
            passed: r.hypotheses_hold(),
            detail: json!({
                "mass_below_gamma": r.mass_below_gamma.ok,
                "nonincreasing": r.nonincreasing.ok,
                "curvature_bound": r.curvature_bound.ok,
                "dafermos": r.dafermos.ok,
                "convex": r.convexity.convex,
            }),
        },
    }
}

fn check_dissipation_pair(
    exp: &Experiment,
    rho: f64,
    delta: f64,
    w_g: Option<f64>,
    full: &EnergySeries,
    exec: Execution,
) -> Result<CheckResult, CliError> {
    let fail = |why: &str| CheckResult { name: Check::Dissipation, passed: false, detail: json!(why) };
    if !(rho > 0.0) {
        return Ok(fail("needs rho > 0"));
    }
    if exp.regime.regime != Regime::Subcritical {
        return Ok(fail("needs the subcritical regime"));
    }
    let coarse = check_dissipation(full, &exp.params, delta)?;
    let half = simulate(exp, rho, 0.5 * exp.config.dt, exec)?;
    let fine = check_dissipation(&series(&half, 1, w_g, exec)?, &exp.params, delta)?;
    let stable = fine.measured_constant <= STABILITY_FACTOR * coarse.measured_constant + STABILITY_SLACK;
    Ok(CheckResult {
        name: Check::Dissipation,
        passed: coarse.ok && fine.ok && stable,
        detail: json!({
            "delta": delta,
            "constant_dt": coarse.measured_constant,
            "constant_half_dt": fine.measured_constant,
            "worst_increase_dt": coarse.worst_increase,
            "worst_increase_half_dt": fine.worst_increase,
            "stable": stable,
        }),
    })
}

fn check_decay(
    fit: &Result<DecayFit, mgt_core::MgtError>,
    e: &[f64],
    regularized: Option<&EnergySeries>,
    exp: &Experiment,
) -> CheckResult {
    let f = match fit {
        Ok(f) => f,
        Err(err) => return CheckResult { name: Check::Decay, passed: false, detail: json!(err.to_string()) },
    };
    let ratio = e.iter().fold(0.0f64, |m, &x| m.max(x / e[0]));
    // M = M₀[1 + g(0)] with M₀ the growth of E_ρ along the regularized run
    let m_from_rho = regularized.map(|s| {
        let m0 = s.points.iter().fold(0.0f64, |m, p| m.max(p.e_rho / s.points[0].e_rho));
        m0 * (1.0 + exp.kernel.g(0.0))
    });
    let bounded = ratio <= m_from_rho.unwrap_or(f.m) * (1.0 + 1e-12);
    CheckResult {
        name: Check::Decay,
        passed: f.valid && f.omega > 0.0 && bounded,
        detail: json!({
            "omega": f.omega,
            "m": f.m,
            "residual": f.residual,
            "max_ratio": ratio,
            "m_from_rho": m_from_rho,
        }),
    }
}

fn check_conservation(traj: &Trajectory) -> Result<CheckResult, CliError> {
    let f0 = match conserved_f_critical(traj, 0.0) {
        Ok(v) => v,
        Err(e) => return Ok(CheckResult { name: Check::Conservation, passed: false, detail: json!(e.to_string()) }),
    };
    let mut drift = 0.0f64;
    for n in 0..traj.len() {
        drift = drift.max((conserved_f_critical(traj, traj.time(n))? - f0).abs() / f0);
    }
    Ok(CheckResult {
        name: Check::Conservation,
        passed: drift <= CONSERVATION_TOLERANCE,
        detail: json!({ "initial": f0, "relative_drift": drift }),
    })
}

fn check_blowup(exp: &Experiment, traj: &Trajectory) -> CheckResult {
    let Some(ev) = &traj.blowup else {
        return CheckResult { name: Check::Blowup, passed: false, detail: json!("no blow-up recorded") };
    };
    let predicted = growth_prediction(exp, ev.witness_lambda);
    let rel = predicted.map(|p| (ev.growth_rate - p).abs() / p.abs());
    CheckResult {
        name: Check::Blowup,
        passed: ev.growth_rate > 0.0 && rel.is_some_and(|r| r <= GROWTH_RATE_TOLERANCE),
        detail: json!({
            "time": ev.time,
            "witness_mode": ev.witness_mode + 1,
            "measured_rate": ev.growth_rate,
            "predicted_rate": predicted,
            "relative_error": rel,
        }),
    }
}

fn check_sandwich(c: Option<SandwichConstants>, full: &EnergySeries) -> CheckResult {
    let Some(c) = c else {
        return CheckResult {
            name: Check::Sandwich,
            passed: false,
            detail: json!("needs an exponential bound on the kernel"),
        };
    };
    let exchange = full.omega_g.filter(|w| w.is_finite()).map(|w| theta_exchange_check(full, 0.5 * w));
    let exchange_ok = match &exchange {
        Some(Ok(x)) => x.holds,
        Some(Err(_)) => false,
        None => true,
    };
    let finite = |x: f64| x.is_finite() && x > 0.0;
    CheckResult {
        name: Check::Sandwich,
        passed: finite(c.f_equivalence)
            && finite(c.psi_bound)
            && c.epsilon.is_some_and(finite)
            && c.min_psi2 >= 0.0
            && c.initial_history_ok
            && exchange_ok,
        detail: json!({
            "constants": c,
            "theta_exchange": exchange.and_then(|r| r.ok()),
        }),
    }
}

fn check_convergence(
    exp: &Experiment,
    plain: &Trajectory,
    exec: Execution,
    out: &mut Outputs,
) -> Result<CheckResult, CliError> {
    let Some(list) = &exp.config.rho_list else {
        return Ok(CheckResult { name: Check::Convergence, passed: false, detail: json!("needs rho_list") });
    };
    let cfg = &exp.config;
    let opts = SolverOptions { execution: exec, ..Default::default() };
    let study = rho_convergence_study(&exp.params, exp.kernel.clone(), &exp.spectrum, &exp.initial, list, cfg.t_end, cfg.dt, opts)?;
    io::write_convergence(&out.path("convergence.csv"), &study.rows)?;
    let decreasing = |xs: &[f64]| xs.windows(2).all(|w| w[1] < w[0]);
    let gaps: Vec<f64> = study.rows.iter().map(|r| r.sup_gap).collect();
    let proxies: Vec<f64> = study.rows.iter().map(|r| r.bound_proxy).collect();

    // E_ρ(t) − E(t) − g(t)‖u(t)‖₁² along the sweep, at each limit time
    let plain_series = series(plain, 1, None, exec)?;
    let mut limit = Vec::new();
    let mut limit_ok = true;
    for &t in LIMIT_TIMES.iter().filter(|&&t| t <= cfg.t_end) {
        let n = plain.index_of(t)?;
        let p = plain_series.points[n];
        let target = p.e + exp.kernel.g(t) * p.u_norm;
        let mut row = Vec::new();
        for run in &study.runs {
            let s = energy_series(run, EnergyOptions { stride: 1, omega_g: None, execution: exec })?;
            row.push((s.points[n].e_rho - target).abs());
        }
        limit_ok &= decreasing(&row);
        limit.push(json!({ "t": t, "gaps": row }));
    }
    Ok(CheckResult {
        name: Check::Convergence,
        passed: decreasing(&gaps) && decreasing(&proxies) && limit_ok,
        detail: json!({ "rho_list": list, "sup_gaps": gaps, "bound_proxies": proxies, "limit_identity": limit }),
    })
}

/// Write the trajectory of a single solve along with its resolved inputs.
pub fn simulate_to_dir(exp: &Experiment, out_dir: &Path, exec: Execution) -> Result<Trajectory, CliError> {
    std::fs::create_dir_all(out_dir).map_err(|e| CliError::io(out_dir, e))?;
    let rho = exp.config.main_rho();
    let traj = simulate(exp, rho, exp.config.dt, exec)?;
    io::write_trajectory(&out_dir.join("trajectory.csv"), &traj)?;
    io::write_json(&out_dir.join("events.json"), &json!({ "regime": exp.regime, "rho": rho, "blowup": traj.blowup }))?;
    io::write_json(
        &out_dir.join("run.json"),
        &RunInfo { config: exp.config.clone(), seed: exp.seed, rho, base_dir: exp.base_dir.clone() },
    )?;
    Ok(traj)
}

/// Energies of a trajectory directory written by `simulate` or `run`.
pub fn energy_from_dir(dir: &Path, exec: Execution) -> Result<EnergySeries, CliError> {
    let info_path = dir.join("run.json");
    let text = std::fs::read_to_string(&info_path).map_err(|e| CliError::io(&info_path, e))?;
    let info: RunInfo = serde_json::from_str(&text).map_err(|e| CliError::Validation(format!("run.json: {e}")))?;
    let exp = info.experiment()?;
    let traj = io::read_trajectory(&dir.join("trajectory.csv"), &exp, info.rho)?;
    let report = audit(&exp, exec)?;
    series(&traj, exp.config.energy_stride, omega_g(&exp, report.as_ref()), exec)
}
