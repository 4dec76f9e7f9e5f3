use serde::{Deserialize, Serialize};

use crate::error::{MgtError, Result};
use crate::kernels::KernelRef;
use crate::spectral_model::{modal_residual, MgtParams, ModalVector, RegimeReport, Spectrum, State};

use super::cutoff::{q_or_one, q_rho_integral, RhoCutoff};
use super::history::HistoryBuffer;

/// Time series of one mode.
#[derive(Debug, Clone, PartialEq)]
pub struct ModeSeries {
    pub u: HistoryBuffer,
    pub v: Vec<f64>,
    pub w: Vec<f64>,
}

impl ModeSeries {
    pub(crate) fn truncate(&mut self, len: usize) {
        self.u.truncate(len);
        self.v.truncate(len);
        self.w.truncate(len);
    }
}

/// Recorded when the phase-space norm first exceeds the blow-up threshold.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlowUpEvent {
    pub time: f64,
    pub step: usize,
    pub norm: f64,
    /// mode with the largest norm at the event
    pub witness_mode: usize,
    pub witness_lambda: f64,
    pub mode_norms: Vec<f64>,
    /// slope of the log running-max of the witness norm over the second half
    /// of the run
    pub growth_rate: f64,
}

/// Multi-mode solution on the uniform grid tₙ = n·dt.
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub params: MgtParams,
    pub kernel: KernelRef,
    pub spectrum: Spectrum,
    /// 0 for the unregularized problem
    pub rho: f64,
    pub dt: f64,
    /// requested end time; the stored grid may stop earlier after a blow-up
    pub t_end: f64,
    pub initial: State,
    pub regime: RegimeReport,
    pub modes: Vec<ModeSeries>,
    pub blowup: Option<BlowUpEvent>,
}

impl Trajectory {
    pub fn n_modes(&self) -> usize {
        self.modes.len()
    }

    /// Number of stored time samples.
    pub fn len(&self) -> usize {
        self.modes.first().map_or(0, |m| m.v.len())
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn time(&self, n: usize) -> f64 {
        n as f64 * self.dt
    }

    pub fn cutoff(&self) -> Option<RhoCutoff> {
        (self.rho > 0.0).then(|| RhoCutoff::new(self.rho).expect("rho validated at solve time"))
    }

    pub fn state(&self, n: usize) -> State {
        State {
            u: ModalVector(self.modes.iter().map(|m| m.u.samples()[n]).collect()),
            v: ModalVector(self.modes.iter().map(|m| m.v[n]).collect()),
            w: ModalVector(self.modes.iter().map(|m| m.w[n]).collect()),
        }
    }

    /// Grid index of time t, which must lie on the stored grid.
    pub fn index_of(&self, t: f64) -> Result<usize> {
        let x = t / self.dt;
        let n = x.round();
        if (x - n).abs() > 1e-6 || n < 0.0 {
            return Err(MgtError::Range(format!("t = {t} is not on the grid of step {}", self.dt)));
        }
        let n = n as usize;
        if n >= self.len() {
            return Err(MgtError::Range(format!(
                "t = {t} is beyond the trajectory end {}",
                self.time(self.len().saturating_sub(1))
            )));
        }
        Ok(n)
    }

    /// Residual of the modal equation for mode j at interior index n, with
    /// u‴ from a central difference of w and the regularizing forcing removed.
    pub fn residual(&self, j: usize, n: usize) -> Result<f64> {
        if n == 0 || n + 1 >= self.len() {
            return Err(MgtError::Range(format!("residual needs an interior index, got {n}")));
        }
        let m = &self.modes[j];
        let lambda = self.spectrum.eigenvalues()[j];
        let u3 = (m.w[n + 1] - m.w[n - 1]) / (2.0 * self.dt);
        let u = m.u.samples();
        let r = modal_residual(&self.params, self.kernel.as_ref(), lambda, &u[..=n], self.dt, [u[n], m.v[n], m.w[n], u3])?;
        let forcing = match self.cutoff() {
            Some(c) => lambda * q_rho_integral(self.kernel.as_ref(), &c, self.time(n))? * u[0],
            None => 0.0,
        };
        Ok(r - forcing)
    }
}

/// η^t(s): u(t) − u(t−s) for s ≤ t, and u(t) + [q_ρ(s−t) − 1]u₀ beyond.
pub fn eta_at(traj: &Trajectory, t: f64, s: f64) -> Result<ModalVector> {
    let n = traj.index_of(t)?;
    if !(s > 0.0) {
        return Err(MgtError::param(format!("eta needs s > 0, got {s}")));
    }
    let t = traj.time(n);
    let cutoff = traj.cutoff();
    let mut out = Vec::with_capacity(traj.n_modes());
    for m in &traj.modes {
        let ut = m.u.samples()[n];
        if s <= t {
            out.push(ut - m.u.at(t - s)?);
        } else {
            let u0 = m.u.samples()[0];
            out.push(ut + (q_or_one(cutoff.as_ref(), s - t) - 1.0) * u0);
        }
    }
    Ok(ModalVector(out))
}
