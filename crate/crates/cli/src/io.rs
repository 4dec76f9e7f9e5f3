//! Files written and read by the pipeline.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use mgt_core::energetics::EnergySeries;
use mgt_core::volterra_solver::{ConvergenceRow, HistoryBuffer, ModeSeries, Trajectory};
use serde::Serialize;

use crate::config::Experiment;
use crate::CliError;

/// 17 significant digits, enough to round-trip every f64.
pub fn num(x: f64) -> String {
    format!("{x:.16e}")
}

fn opt(x: Option<f64>) -> String {
    x.map(num).unwrap_or_default()
}

fn writer(path: &Path) -> Result<csv::Writer<BufWriter<File>>, CliError> {
    let file = File::create(path).map_err(|e| CliError::io(path, e))?;
    Ok(csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(BufWriter::new(file)))
}

fn csv_err(path: &Path, e: csv::Error) -> CliError {
    CliError::Numerical(format!("{}: {e}", path.display()))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let file = File::create(path).map_err(|e| CliError::io(path, e))?;
    let mut w = BufWriter::new(file);
    serde_json::to_writer_pretty(&mut w, value).map_err(|e| CliError::Numerical(e.to_string()))?;
    w.write_all(b"\n").map_err(|e| CliError::io(path, e))?;
    Ok(())
}

/// Rows (t, j, u, v, w) with j counted from 1, time-major.
pub fn write_trajectory(path: &Path, traj: &Trajectory) -> Result<(), CliError> {
    let mut w = writer(path)?;
    w.write_record(["t", "j", "u", "v", "w"]).map_err(|e| csv_err(path, e))?;
    let longest = traj.modes.iter().map(|m| m.v.len()).max().unwrap_or(0);
    for n in 0..longest {
        let t = num(traj.time(n));
        for (j, m) in traj.modes.iter().enumerate() {
            if n < m.v.len() {
                let row = [t.clone(), (j + 1).to_string(), num(m.u.samples()[n]), num(m.v[n]), num(m.w[n])];
                w.write_record(&row).map_err(|e| csv_err(path, e))?;
            }
        }
    }
    w.flush().map_err(|e| CliError::io(path, e))
}

/// Rebuild a trajectory written by [`write_trajectory`] for the experiment
/// it came from.
pub fn read_trajectory(path: &Path, exp: &Experiment, rho: f64) -> Result<Trajectory, CliError> {
    let mut r = csv::Reader::from_path(path).map_err(|e| csv_err(path, e))?;
    let n_modes = exp.spectrum.len();
    let dt = exp.config.dt;
    let mut cols: Vec<(Vec<f64>, Vec<f64>, Vec<f64>)> = vec![Default::default(); n_modes];
    for rec in r.records() {
        let rec = rec.map_err(|e| csv_err(path, e))?;
        let field = |i: usize| -> Result<f64, CliError> {
            rec.get(i)
                .and_then(|s| s.parse().ok())
                .ok_or_else(|| CliError::Validation(format!("{}: bad field {i} in {rec:?}", path.display())))
        };
        let j = field(1)? as usize;
        if j == 0 || j > n_modes {
            return Err(CliError::Validation(format!("{}: mode {j} outside 1..={n_modes}", path.display())));
        }
        let c = &mut cols[j - 1];
        c.0.push(field(2)?);
        c.1.push(field(3)?);
        c.2.push(field(4)?);
    }
    let modes = cols
        .into_iter()
        .map(|(u, v, w)| {
            let mut buf = HistoryBuffer::with_capacity(dt, *u.first().unwrap_or(&0.0), u.len());
            for &x in u.iter().skip(1) {
                buf.push(x);
            }
            ModeSeries { u: buf, v, w }
        })
        .collect();
    Ok(Trajectory {
        params: exp.params,
        kernel: exp.kernel.clone(),
        spectrum: exp.spectrum.clone(),
        rho,
        dt,
        t_end: exp.config.t_end,
        initial: exp.initial.clone(),
        regime: exp.regime,
        modes,
        blowup: None,
    })
}

pub const ENERGY_COLUMNS: [&str; 8] = ["t", "E", "E_rho", "F_rho", "Psi1", "Psi2", "Theta", "Lambda"];

/// Unavailable functionals are written as empty fields.
pub fn write_energy(path: &Path, series: &EnergySeries) -> Result<(), CliError> {
    let mut w = writer(path)?;
    w.write_record(ENERGY_COLUMNS).map_err(|e| csv_err(path, e))?;
    for (i, p) in series.points.iter().enumerate() {
        let lambda = series.lambda.as_ref().map(|l| l[i]);
        let row = [
            num(p.t),
            num(p.e),
            num(p.e_rho),
            num(p.f_rho),
            num(p.psi1),
            opt(p.psi2),
            opt(p.theta),
            opt(lambda),
        ];
        w.write_record(&row).map_err(|e| csv_err(path, e))?;
    }
    w.flush().map_err(|e| CliError::io(path, e))
}

/// (t, column) pairs from an energy file, skipping empty entries.
pub fn read_energy_column(path: &Path, field: &str) -> Result<(Vec<f64>, Vec<f64>), CliError> {
    let mut r = csv::Reader::from_path(path).map_err(|e| csv_err(path, e))?;
    let headers = r.headers().map_err(|e| csv_err(path, e))?.clone();
    let idx = headers
        .iter()
        .position(|h| h == field)
        .ok_or_else(|| CliError::Validation(format!("{}: no column {field}", path.display())))?;
    let (mut ts, mut vs) = (Vec::new(), Vec::new());
    for rec in r.records() {
        let rec = rec.map_err(|e| csv_err(path, e))?;
        let parse = |s: &str| s.parse::<f64>().map_err(|e| CliError::Validation(format!("{}: {e}", path.display())));
        let v = rec.get(idx).unwrap_or("");
        if v.is_empty() {
            continue;
        }
        ts.push(parse(rec.get(0).unwrap_or(""))?);
        vs.push(parse(v)?);
    }
    Ok((ts, vs))
}

pub fn write_convergence(path: &Path, rows: &[ConvergenceRow]) -> Result<(), CliError> {
    let mut w = writer(path)?;
    w.write_record(["rho_large", "rho_small", "sup_gap", "bound_proxy"]).map_err(|e| csv_err(path, e))?;
    for r in rows {
        w.write_record([num(r.rho_large), num(r.rho_small), num(r.sup_gap), num(r.bound_proxy)])
            .map_err(|e| csv_err(path, e))?;
    }
    w.flush().map_err(|e| CliError::io(path, e))
}
