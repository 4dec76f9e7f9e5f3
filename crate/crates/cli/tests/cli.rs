use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

const SMALL: &str = r#"
alpha = 2.0
beta = 1.0
gamma = 1.0
T = 2.0
dt = 0.01
rho = 0.1
seed = 9
energy_stride = 5
checks = ["dissipation", "sandwich"]

[kernel]
type = "oscillating"
scale = 0.2

[spectrum]
preset = "dirichlet1d"
n_modes = 3
"#;

fn mgt(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mgt")).args(args).output().expect("binary runs")
}

fn write_config(dir: &Path, name: &str, body: &str) -> String {
    let p = dir.join(name);
    std::fs::write(&p, body).unwrap();
    p.to_string_lossy().into_owned()
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap_or(-1)
}

fn read(p: impl AsRef<Path>) -> Vec<u8> {
    std::fs::read(p).unwrap()
}

#[test]
fn same_config_and_seed_give_identical_files() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "small.toml", SMALL);
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    assert_eq!(code(&mgt(&["run", "--config", &cfg, "--out", a.to_str().unwrap()])), 0);
    assert_eq!(code(&mgt(&["--threads", "1", "run", "--config", &cfg, "--out", b.to_str().unwrap()])), 0);
    for f in ["trajectory.csv", "energy.csv", "energy_unregularized.csv", "fit.json", "manifest.json"] {
        assert_eq!(read(a.join(f)), read(b.join(f)), "{f} differs");
    }
    let c = dir.path().join("c");
    assert_eq!(code(&mgt(&["run", "--config", &cfg, "--out", c.to_str().unwrap(), "--seed", "10"])), 0);
    assert_ne!(read(a.join("trajectory.csv")), read(c.join("trajectory.csv")));
}

#[test]
fn csv_numbers_carry_seventeen_digits_and_lf_endings() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "small.toml", SMALL);
    let out = dir.path().join("o");
    assert_eq!(code(&mgt(&["simulate", "--config", &cfg, "--out", out.to_str().unwrap()])), 0);
    let text = String::from_utf8(read(out.join("trajectory.csv"))).unwrap();
    assert!(!text.contains('\r'));
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("t,j,u,v,w"));
    let row: Vec<&str> = lines.next().unwrap().split(',').collect();
    assert_eq!(row[1], "1");
    let mantissa = row[2].split('e').next().unwrap().trim_start_matches('-');
    assert_eq!(mantissa.replace('.', "").len(), 17, "{}", row[2]);
}

#[test]
fn validation_failures_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("o");
    let out = out.to_str().unwrap();
    let empty = SMALL.replace("n_modes = 3", "n_modes = 0");
    let cases = [
        empty,
        SMALL.replace("dt = 0.01", "dt = 0.03"),
        SMALL.replace("scale = 0.2", "scale = 1.0"),
        SMALL.replace("seed = 9", "seed = 9\ncolour = 1"),
        SMALL.replace("alpha = 2.0", "alpha = -2.0"),
    ];
    for (i, body) in cases.iter().enumerate() {
        let cfg = write_config(dir.path(), &format!("bad{i}.toml"), body);
        let o = mgt(&["run", "--config", &cfg, "--out", out]);
        assert_eq!(code(&o), 2, "case {i}: {}", String::from_utf8_lossy(&o.stderr));
    }
    assert_eq!(code(&mgt(&["run", "--config", "/nonexistent/x.toml", "--out", out])), 2);
}

#[test]
fn failed_check_exits_with_three() {
    let dir = tempfile::tempdir().unwrap();
    let body = SMALL.replace(r#"checks = ["dissipation", "sandwich"]"#, r#"checks = ["blowup"]"#);
    let cfg = write_config(dir.path(), "c.toml", &body);
    let o = mgt(&["run", "--config", &cfg, "--out", dir.path().join("o").to_str().unwrap()]);
    assert_eq!(code(&o), 3);
    assert!(String::from_utf8_lossy(&o.stdout).contains("blowup       FAIL"));
}

#[test]
fn blowup_in_a_stable_regime_exits_with_four() {
    let dir = tempfile::tempdir().unwrap();
    let body = SMALL.replace("T = 2.0", "T = 50.0").replace("dt = 0.01", "dt = 0.5").replace("n_modes = 3", "n_modes = 8");
    let cfg = write_config(dir.path(), "c.toml", &body);
    let o = mgt(&["simulate", "--config", &cfg, "--out", dir.path().join("o").to_str().unwrap()]);
    assert_eq!(code(&o), 4, "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn simulate_then_energy_matches_run() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "small.toml", SMALL);
    let sim = dir.path().join("sim");
    let run = dir.path().join("run");
    assert_eq!(code(&mgt(&["simulate", "--config", &cfg, "--out", sim.to_str().unwrap()])), 0);
    assert_eq!(code(&mgt(&["run", "--config", &cfg, "--out", run.to_str().unwrap()])), 0);
    assert_eq!(read(sim.join("trajectory.csv")), read(run.join("trajectory.csv")));
    let energy = dir.path().join("energy.csv");
    let o = mgt(&["energy", "--trajectory", sim.to_str().unwrap(), "--out", energy.to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let mut ours = csv::Reader::from_path(&energy).unwrap();
    let mut theirs = csv::Reader::from_path(run.join("energy.csv")).unwrap();
    assert_eq!(ours.headers().unwrap(), theirs.headers().unwrap());
    let a: Vec<csv::StringRecord> = ours.records().map(Result::unwrap).collect();
    let b: Vec<csv::StringRecord> = theirs.records().map(Result::unwrap).collect();
    assert_eq!(a.len(), b.len());
    for (ra, rb) in a.iter().zip(&b) {
        // every column except Lambda, whose ε is chosen over the sampled points
        for i in 0..7 {
            assert_eq!(ra.get(i), rb.get(i), "column {i} at t = {}", ra.get(0).unwrap());
        }
    }
}

#[test]
fn fit_reads_an_energy_column() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "small.toml", SMALL);
    let run = dir.path().join("run");
    assert_eq!(code(&mgt(&["run", "--config", &cfg, "--out", run.to_str().unwrap()])), 0);
    let input = run.join("energy.csv");
    let o = mgt(&["fit", "--in", input.to_str().unwrap(), "--field", "E_rho"]);
    assert_eq!(code(&o), 0);
    let fit: Value = serde_json::from_slice(&o.stdout).unwrap();
    assert!(fit["omega"].as_f64().unwrap().is_finite());
    assert!(fit["m"].as_f64().unwrap() >= 1.0);
    assert_eq!(code(&mgt(&["fit", "--in", input.to_str().unwrap(), "--field", "nope"])), 2);
}

#[test]
fn audit_accepts_shorthand_and_inline_specs() {
    let o = mgt(&["audit", "--kernel", "staircase:n_max=20", "--alpha", "2", "--delta", "1"]);
    assert_eq!(code(&o), 0);
    let r: Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(r["dafermos"]["ok"], Value::Bool(false));
    assert_eq!(r["curvature_bound"]["ok"], Value::Bool(true));
    assert_eq!(r["convexity"]["convex"], Value::Bool(false));

    let o = mgt(&["audit", "--kernel", "type=\"exponential\",k=1.0,nu=2.0", "--alpha", "1", "--delta", "0.5", "--gamma", "1"]);
    assert_eq!(code(&o), 0);
    let r: Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(r["dafermos"]["ok"], Value::Bool(true));
    assert_eq!(r["mass_below_gamma"]["ok"], Value::Bool(true));

    assert_eq!(code(&mgt(&["audit", "--kernel", "staircase", "--alpha", "2", "--delta", "1"])), 2);
    assert_eq!(code(&mgt(&["audit", "--kernel", "wavy", "--alpha", "2", "--delta", "1"])), 2);
}
