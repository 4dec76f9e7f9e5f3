//! End-to-end acceptance suite. Prints one line per criterion and exits
//! nonzero if any of them fails.

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;
use std::time::{Duration, Instant};

use mgt_cli::config::{generic_data, Check, ExperimentConfig};
use mgt_cli::pipeline::{run_experiment, Manifest};
use mgt_core::kernel_audit::{audit_kernel, AuditGrid};
use mgt_core::kernels::{make_exponential, make_oscillating, make_staircase, KernelRef, KernelSpec, MemoryKernel};
use mgt_core::memory_space::{uniform_grid, DomainTElement, MemorySpace};
use mgt_core::spectral_model::{MgtParams, Spectrum};
use mgt_core::volterra_solver::{oracle_exponential, q_rho_integral, solve, RhoCutoff};
use mgt_core::Execution;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::Value;

const ORACLE_TOLERANCE: f64 = 1e-6;
const ORACLE_TIME_LIMIT: Duration = Duration::from_secs(5);
const IDENTITY_TOLERANCE: f64 = 1e-8;
const IDENTITY_MIN_ORDER: f64 = 1.8;
const GROWTH_TOLERANCE: f64 = 0.02;
const DRIFT_TOLERANCE: f64 = 1e-6;
const FIT_TOLERANCE: f64 = 0.05;
const Q_RHO_SLACK: f64 = 1e-12;
const SUITE_TIME_LIMIT: Duration = Duration::from_secs(600);

type Outcome = Result<String, String>;

struct Runs {
    _dir: tempfile::TempDir,
    manifests: Vec<(String, Manifest, PathBuf)>,
}

impl Runs {
    fn get(&self, name: &str) -> &Manifest {
        &self.manifests.iter().find(|(n, ..)| n == name).expect("preset ran").1
    }
}

fn presets_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../presets")
}

fn run_presets() -> Result<Runs, String> {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let mut paths: Vec<PathBuf> = std::fs::read_dir(presets_dir())
        .map_err(|e| e.to_string())?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "toml"))
        .collect();
    paths.sort();
    let mut manifests = Vec::new();
    for path in paths {
        let name = path.file_stem().unwrap().to_string_lossy().into_owned();
        let start = Instant::now();
        let cfg = ExperimentConfig::load(&path).map_err(|e| format!("{name}: {e}"))?;
        let exp = cfg.validate(None, path.parent()).map_err(|e| format!("{name}: {e}"))?;
        let out = dir.path().join(&name);
        let m = run_experiment(&exp, &out, Execution::Parallel).map_err(|e| format!("{name}: {e}"))?;
        println!("  preset {name:<18} {:>6.1} s, declared checks pass: {}", start.elapsed().as_secs_f64(), m.all_passed());
        manifests.push((name, m, out));
    }
    Ok(Runs { _dir: dir, manifests })
}

fn detail(m: &Manifest, check: Check) -> Result<&Value, String> {
    let c = m.check(check).ok_or_else(|| format!("{check:?} not declared"))?;
    if !c.passed {
        return Err(format!("{check:?} failed: {}", c.detail));
    }
    Ok(&c.detail)
}

fn f(v: &Value, key: &str) -> f64 {
    v[key].as_f64().unwrap_or(f64::NAN)
}

fn floats(v: &Value) -> Vec<f64> {
    v.as_array().map(|a| a.iter().filter_map(Value::as_f64).collect()).unwrap_or_default()
}

fn strictly_decreasing(xs: &[f64]) -> bool {
    xs.len() >= 2 && xs.windows(2).all(|w| w[1] < w[0])
}

fn oracle_equivalence() -> Outcome {
    let p = MgtParams::new(1.0, 2.0, 1.0).map_err(|e| e.to_string())?;
    let s0 = generic_data(1, 1);
    let data = [s0.u.0[0], s0.v.0[0], s0.w.0[0]];
    let start = Instant::now();
    let k = Arc::new(make_exponential(0.5, 1.0).unwrap());
    let spec = Spectrum::new(vec![1.0]).unwrap();
    let traj = solve(&p, k, &spec, &mgt_core::State::from_triples(&[data]), 0.0, 10.0, 1e-3).map_err(|e| e.to_string())?;
    let elapsed = start.elapsed();
    let o = oracle_exponential(&p, 0.5, 1.0, 1.0, data, 10.0, 1e-3).map_err(|e| e.to_string())?;
    let m = &traj.modes[0];
    let mut gap = [0.0f64; 3];
    for n in 0..traj.len() {
        gap[0] = gap[0].max((m.u.samples()[n] - o.u[n]).abs());
        gap[1] = gap[1].max((m.v[n] - o.v[n]).abs());
        gap[2] = gap[2].max((m.w[n] - o.w[n]).abs());
    }
    let msg = format!("max gaps u {:.2e} v {:.2e} w {:.2e}, solve {:.2} s", gap[0], gap[1], gap[2], elapsed.as_secs_f64());
    if gap.iter().all(|&g| g <= ORACLE_TOLERANCE) && elapsed < ORACLE_TIME_LIMIT {
        Ok(msg)
    } else {
        Err(msg)
    }
}

fn dissipation(runs: &Runs) -> Outcome {
    let d = detail(runs.get("example_3_4"), Check::Dissipation)?;
    Ok(format!(
        "C(dt) {:.3e}, C(dt/2) {:.3e}, worst F increase {:.2e}/{:.2e}",
        f(d, "constant_dt"),
        f(d, "constant_half_dt"),
        f(d, "worst_increase_dt"),
        f(d, "worst_increase_half_dt")
    ))
}

fn decay(runs: &Runs) -> Outcome {
    let m = runs.get("example_3_4");
    if m.config.t_end != 40.0 {
        return Err(format!("preset horizon is {}, expected 40", m.config.t_end));
    }
    let d = detail(m, Check::Decay)?;
    let (omega, residual, big_m, ratio) = (f(d, "omega"), f(d, "residual"), f(d, "m"), f(d, "max_ratio"));
    let msg = format!("omega {omega:.4}, residual {:.2}%, max E/E(0) {ratio:.3} <= M {big_m:.3}", 100.0 * residual);
    if omega > 0.0 && residual <= FIT_TOLERANCE && ratio <= big_m {
        Ok(msg)
    } else {
        Err(msg)
    }
}

fn trichotomy(runs: &Runs) -> Outcome {
    let sub = detail(runs.get("subcritical_mgt"), Check::Decay)?;
    let crit = detail(runs.get("critical_mgt"), Check::Conservation)?;
    let sup = detail(runs.get("supercritical_mgt"), Check::Blowup)?;
    let omega = f(sub, "omega");
    let drift = f(crit, "relative_drift");
    let (rate, err) = (f(sup, "measured_rate"), f(sup, "relative_error"));
    let msg = format!(
        "subcritical omega {omega:.4}; critical drift {drift:.1e}; supercritical rate {rate:.5} (rel. err {err:.1e}, mode {})",
        sup["witness_mode"]
    );
    if omega > 0.0 && drift <= DRIFT_TOLERANCE && rate > 0.0 && err <= GROWTH_TOLERANCE {
        Ok(msg)
    } else {
        Err(msg)
    }
}

fn generator_identity() -> Outcome {
    let kernels: Vec<KernelRef> = vec![
        Arc::new(make_exponential(1.0, 1.0).unwrap()),
        Arc::new(make_oscillating()),
        Arc::new(make_staircase(6).unwrap()),
    ];
    type Profile = (fn(f64) -> f64, fn(f64) -> f64);
    let profiles: [Profile; 3] = [
        (|s| s * (-s).exp(), |s| (1.0 - s) * (-s).exp()),
        (|s| 1.0 - (-s).exp(), |s| (-s).exp()),
        (|s| s.sin() * (-0.5 * s).exp(), |s| (s.cos() - 0.5 * s.sin()) * (-0.5 * s).exp()),
    ];
    let spec = Spectrum::new(vec![1.0]).unwrap();
    let (mut worst_rel, mut min_order) = (0.0f64, f64::INFINITY);
    for k in kernels {
        let m = MemorySpace::new(k.clone(), spec.clone());
        for (g, dg) in profiles {
            let gap = |ds: f64| -> Result<_, String> {
                let e = DomainTElement::sample(uniform_grid(40.0, ds), |s| vec![g(s)], |s| vec![dg(s)])
                    .map_err(|e| e.to_string())?;
                m.generator_identity(&e).map_err(|e| e.to_string())
            };
            let fine = gap(1e-4)?;
            let coarse = gap(2e-4)?;
            worst_rel = worst_rel.max(fine.gap / fine.lhs.abs().max(1.0));
            if coarse.gap > 1e-12 {
                min_order = min_order.min((coarse.gap / fine.gap).log2());
            }
        }
    }
    let msg = format!("worst gap/max(1,|lhs|) {worst_rel:.2e}, smallest observed order {min_order:.2}");
    if worst_rel <= IDENTITY_TOLERANCE && min_order >= IDENTITY_MIN_ORDER {
        Ok(msg)
    } else {
        Err(msg)
    }
}

fn audits(runs: &Runs) -> Outcome {
    let cfg = &runs.get("example_3_4").config;
    let osc = cfg.kernel.build(None).map_err(|e| e.to_string())?;
    let grid = AuditGrid::for_kernel(osc.as_ref());
    let r = audit_kernel(osc.as_ref(), 2.0, 1.0, Some(cfg.gamma), &grid, Execution::Parallel).map_err(|e| e.to_string())?;
    if !(r.hypotheses_hold() && !r.convexity.convex) {
        return Err(format!("oscillating: hypotheses {} convex {}", r.hypotheses_hold(), r.convexity.convex));
    }
    let stair = KernelSpec::Staircase { n_max: 20, scale: None }.build(None).map_err(|e| e.to_string())?;
    let grid = AuditGrid::for_kernel(stair.as_ref());
    let mut witnesses = Vec::new();
    for delta in [0.1, 0.5, 1.0] {
        let r = audit_kernel(stair.as_ref(), delta + 1.0, delta, None, &grid, Execution::Parallel)
            .map_err(|e| e.to_string())?;
        if !(r.curvature_bound.ok && r.exp_bound.ok) {
            return Err(format!("staircase at delta {delta}: curvature {} exp bound {}", r.curvature_bound.ok, r.exp_bound.ok));
        }
        if r.dafermos.ok || r.dafermos.worst_margin <= 0.0 || r.dafermos.worst_margin.is_nan() {
            return Err(format!("staircase satisfies the Dafermos condition at delta {delta}"));
        }
        witnesses.push(format!("delta {delta}: s = {}", r.dafermos.worst_point));
    }
    Ok(format!("oscillating admissible with alpha - delta = 1 and nonconvex; staircase violates g' + delta g <= 0 at {}", witnesses.join(", ")))
}

fn rho_convergence(runs: &Runs) -> Outcome {
    let m = runs.get("exponential");
    let d = detail(m, Check::Convergence)?;
    let rho = floats(&d["rho_list"]);
    if rho != [0.4, 0.2, 0.1, 0.05] {
        return Err(format!("rho_list is {rho:?}"));
    }
    let gaps = floats(&d["sup_gaps"]);
    let proxies = floats(&d["bound_proxies"]);
    let limits: Vec<(f64, Vec<f64>)> = d["limit_identity"]
        .as_array()
        .map(|a| a.iter().map(|x| (f(x, "t"), floats(&x["gaps"]))).collect())
        .unwrap_or_default();
    let times: Vec<f64> = limits.iter().map(|l| l.0).collect();
    let msg = format!("sup gaps {gaps:.3?}, proxies {proxies:.3?}, limit gaps at t = {times:?} decreasing");
    if strictly_decreasing(&gaps)
        && strictly_decreasing(&proxies)
        && times == [1.0, 5.0, 10.0]
        && limits.iter().all(|l| strictly_decreasing(&l.1))
    {
        Ok(msg)
    } else {
        Err(msg)
    }
}

fn sandwich(runs: &Runs) -> Outcome {
    let mut parts = Vec::new();
    for (name, _, dir) in &runs.manifests {
        let text = std::fs::read_to_string(dir.join("manifest.json")).map_err(|e| e.to_string())?;
        let v: Value = serde_json::from_str(&text).map_err(|e| e.to_string())?;
        let s = &v["measured"]["sandwich"];
        let positive = |k: &str| f(s, k).is_finite() && f(s, k) > 0.0;
        let ok = positive("f_equivalence")
            && positive("psi_bound")
            && positive("epsilon")
            && f(s, "min_psi2") >= 0.0
            && s["initial_history_ok"] == Value::Bool(true);
        if !ok {
            return Err(format!("{name}: {s}"));
        }
        parts.push(format!("{name} C={:.2}", f(s, "f_equivalence")));
    }
    Ok(parts.join(", "))
}

fn q_rho_bound() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let osc = make_oscillating();
    let stair = make_staircase(8).unwrap();
    let mut worst = f64::NEG_INFINITY;
    for _ in 0..1000 {
        let t = rng.gen_range(0.0..20.0);
        let rho = RhoCutoff::new(rng.gen_range(1e-3..2.0)).unwrap();
        let exp = make_exponential(rng.gen_range(0.01..3.0), rng.gen_range(0.1..4.0)).unwrap();
        let ks: [&dyn MemoryKernel; 3] = [&exp, &osc, &stair];
        let k = ks[rng.gen_range(0..3)];
        let q = q_rho_integral(k, &rho, t).map_err(|e| e.to_string())?;
        worst = worst.max(q - rho.rho() * k.g(t));
    }
    let msg = format!("max Q_rho - rho g over 1000 triples: {worst:.2e}");
    if worst <= Q_RHO_SLACK {
        Ok(msg)
    } else {
        Err(msg)
    }
}

fn main() -> ExitCode {
    let start = Instant::now();
    let mut results: Vec<(&str, Outcome)> = Vec::new();
    results.push(("1 oracle equivalence", oracle_equivalence()));
    match run_presets() {
        Ok(runs) => {
            results.push(("2 dissipation", dissipation(&runs)));
            results.push(("3 exponential decay", decay(&runs)));
            results.push(("4 regime trichotomy", trichotomy(&runs)));
            results.push(("5 generator identity", generator_identity()));
            results.push(("6 kernel audits", audits(&runs)));
            results.push(("7 rho convergence", rho_convergence(&runs)));
            results.push(("8 sandwich constants", sandwich(&runs)));
            let all = runs.manifests.iter().all(|(_, m, _)| m.all_passed());
            results.push(("presets pass declared checks", if all { Ok("all".into()) } else { Err("see above".into()) }));
        }
        Err(e) => results.push(("preset runs", Err(e))),
    }
    results.push(("9 Q_rho bound", q_rho_bound()));
    let elapsed = start.elapsed();
    let timing = format!("{:.1} s", elapsed.as_secs_f64());
    results.push(("suite runtime", if elapsed < SUITE_TIME_LIMIT { Ok(timing) } else { Err(timing) }));

    let mut failed = 0;
    for (name, r) in &results {
        match r {
            Ok(msg) => println!("PASS {name:<30} {msg}"),
            Err(msg) => {
                failed += 1;
                println!("FAIL {name:<30} {msg}");
            }
        }
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        println!("{failed} criteria failed");
        ExitCode::FAILURE
    }
}
