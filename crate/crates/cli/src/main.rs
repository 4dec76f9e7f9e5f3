#![allow(clippy::neg_cmp_op_on_partial_ord)]

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use mgt_core::kernel_audit::{audit_kernel, AuditGrid, DEFAULT_TOLERANCE};
use mgt_core::kernels::KernelSpec;
use mgt_core::volterra_solver::{rho_convergence_study, SolverOptions};
use mgt_core::Execution;
use mgt_cli::config::{Experiment, ExperimentConfig};
use mgt_cli::{io, pipeline, CliError};

#[derive(Parser)]
#[command(name = "mgt", version, about = "MGT equation with memory: simulation, energies and kernel audits")]
struct Cli {
    /// worker threads; 1 runs everything sequentially
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    out: Option<PathBuf>,
    /// overrides the seed in the config
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Subcommand)]
enum Command {
    /// Solve and write trajectory.csv, events.json and run.json
    Simulate(RunArgs),
    /// Energy functionals of a simulated trajectory
    Energy {
        #[arg(long)]
        trajectory: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Fit an exponential envelope to one column of an energy file
    Fit {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long, default_value = "E")]
        field: String,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Audit a kernel, e.g. `--kernel staircase:n_max=20`
    Audit {
        #[arg(long)]
        kernel: String,
        #[arg(long)]
        alpha: f64,
        #[arg(long)]
        delta: f64,
        #[arg(long)]
        gamma: Option<f64>,
        /// CSV with a column `s` of grid points
        #[arg(long)]
        grid_file: Option<PathBuf>,
    },
    /// Sweep rho_list and write convergence.csv
    Converge(RunArgs),
    /// Full pipeline with checks and manifest
    Run(RunArgs),
}

fn execution(threads: Option<usize>) -> Result<Execution, CliError> {
    match threads {
        Some(0) => Err(CliError::Validation("--threads must be at least 1".into())),
        Some(1) => Ok(Execution::Sequential),
        #[cfg(feature = "parallel")]
        Some(n) => {
            rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build_global()
                .map_err(|e| CliError::Validation(e.to_string()))?;
            Ok(Execution::Parallel)
        }
        #[cfg(not(feature = "parallel"))]
        Some(_) => Ok(Execution::Sequential),
        None => Ok(Execution::default()),
    }
}

fn load(args: &RunArgs) -> Result<(Experiment, PathBuf), CliError> {
    let cfg = ExperimentConfig::load(&args.config)?;
    let base = args.config.parent().map(Path::to_path_buf);
    let exp = cfg.validate(args.seed, base.as_deref())?;
    let out = args
        .out
        .clone()
        .or_else(|| cfg.output.clone())
        .ok_or_else(|| CliError::Validation("no output directory: pass --out or set `output`".into()))?;
    Ok((exp, out))
}

/// `name` or `name:key=value,...`, or an inline TOML table body.
fn parse_kernel(text: &str) -> Result<KernelSpec, CliError> {
    let body = if text.contains('=') && !text.contains(':') {
        text.replace(',', "\n")
    } else {
        let (name, rest) = text.split_once(':').unwrap_or((text, ""));
        let mut s = format!("type = \"{}\"\n", name.trim());
        for kv in rest.split(',').filter(|kv| !kv.trim().is_empty()) {
            s.push_str(kv.trim());
            s.push('\n');
        }
        s
    };
    toml::from_str(&body).map_err(|e| CliError::Validation(format!("kernel spec `{text}`: {e}")))
}

fn read_grid(path: &Path) -> Result<AuditGrid, CliError> {
    let mut r = csv::Reader::from_path(path).map_err(|e| CliError::Validation(format!("{}: {e}", path.display())))?;
    let mut pts = Vec::new();
    for rec in r.records() {
        let rec = rec.map_err(|e| CliError::Validation(e.to_string()))?;
        let v: f64 = rec
            .get(0)
            .and_then(|s| s.trim().parse().ok())
            .ok_or_else(|| CliError::Validation(format!("{}: bad grid point {rec:?}", path.display())))?;
        pts.push(v);
    }
    Ok(AuditGrid::new(pts, DEFAULT_TOLERANCE)?)
}

fn print_json<T: serde::Serialize>(v: &T) -> Result<(), CliError> {
    println!("{}", serde_json::to_string_pretty(v).map_err(|e| CliError::Numerical(e.to_string()))?);
    Ok(())
}

fn dispatch(cli: Cli) -> Result<(), CliError> {
    let exec = execution(cli.threads)?;
    match cli.command {
        Command::Simulate(args) => {
            let (exp, out) = load(&args)?;
            let traj = pipeline::simulate_to_dir(&exp, &out, exec)?;
            if let Some(ev) = &traj.blowup {
                eprintln!("blow-up at t = {} (mode {})", ev.time, ev.witness_mode + 1);
            }
            Ok(())
        }
        Command::Energy { trajectory, out } => {
            let series = pipeline::energy_from_dir(&trajectory, exec)?;
            io::write_energy(&out, &series)
        }
        Command::Fit { input, field, out } => {
            let (t, v) = io::read_energy_column(&input, &field)?;
            let fit = mgt_core::energetics::fit_decay(&t, &v)?;
            match out {
                Some(p) => io::write_json(&p, &fit),
                None => print_json(&fit),
            }
        }
        Command::Audit { kernel, alpha, delta, gamma, grid_file } => {
            let k = parse_kernel(&kernel)?.build(None)?;
            let grid = match grid_file {
                Some(p) => read_grid(&p)?,
                None => AuditGrid::for_kernel(k.as_ref()),
            };
            print_json(&audit_kernel(k.as_ref(), alpha, delta, gamma, &grid, exec)?)
        }
        Command::Converge(args) => {
            let (exp, out) = load(&args)?;
            let list = exp
                .config
                .rho_list
                .clone()
                .ok_or_else(|| CliError::Validation("converge needs rho_list in the config".into()))?;
            let opts = SolverOptions { execution: exec, ..Default::default() };
            let c = &exp.config;
            let study =
                rho_convergence_study(&exp.params, exp.kernel.clone(), &exp.spectrum, &exp.initial, &list, c.t_end, c.dt, opts)?;
            std::fs::create_dir_all(&out).map_err(|e| CliError::Validation(format!("{}: {e}", out.display())))?;
            io::write_convergence(&out.join("convergence.csv"), &study.rows)
        }
        Command::Run(args) => {
            let (exp, out) = load(&args)?;
            let manifest = pipeline::run_experiment(&exp, &out, exec)?;
            for c in &manifest.checks {
                println!("{:<12} {}", format!("{:?}", c.name).to_lowercase(), if c.passed { "pass" } else { "FAIL" });
            }
            if manifest.all_passed() {
                Ok(())
            } else {
                let failed: Vec<String> =
                    manifest.checks.iter().filter(|c| !c.passed).map(|c| format!("{:?}", c.name).to_lowercase()).collect();
                Err(CliError::Check(failed.join(", ")))
            }
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
