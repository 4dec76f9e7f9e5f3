//! Energy functionals along a trajectory.
//!
//! Integrals over s ∈ [0, t] use the trapezoidal rule on the time grid, where
//! η^t(s) = u(t) − u(t−s) is known exactly at the nodes. For s > t the history
//! is u(t) + [q_ρ(s−t) − 1]u₀, so every weighted integral there reduces to
//! three scalar moments of the weight, computed once per time.

mod checks;
mod fit;

use serde::{Deserialize, Serialize};

use crate::error::{MgtError, Result};
use crate::exec::Execution;
use crate::kernels::MemoryKernel;
use crate::quad;
use crate::spectral_model::Regime;
use crate::volterra_solver::{RhoCutoff, Trajectory};

pub use checks::{
    check_dissipation, conserved_f_critical, sandwich_constants, theta_exchange_check, DissipationReport,
    SandwichConstants, ThetaExchange, DISSIPATION_ALLOWANCE,
};
pub use fit::{fit_decay, DecayFit, FIT_RESIDUAL_TOLERANCE};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnergyOptions {
    /// evaluate every `stride`-th grid point (the last point is always included)
    pub stride: usize,
    /// rate of an exponential bound on g, possibly infinite; required for
    /// Θ, Ψ and Λ
    pub omega_g: Option<f64>,
    pub execution: Execution,
}

impl Default for EnergyOptions {
    fn default() -> Self {
        Self { stride: 1, omega_g: None, execution: Execution::default() }
    }
}

/// All functionals at one time.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct EnergyPoint {
    pub t: f64,
    pub e: f64,
    pub e_rho: f64,
    /// The six-term formula, evaluated in every regime. It is only a
    /// Lyapunov functional when the stability number is positive.
    pub f_rho: f64,
    pub psi1: f64,
    /// None without an exponential bound on g
    pub psi2: Option<f64>,
    pub theta: Option<f64>,
    /// E_ρ(0) e^{−ω_g t}
    pub decay_term: Option<f64>,
    /// ‖u‖₁²
    pub u_norm: f64,
    /// ‖∂ₜu‖₁²
    pub v_norm: f64,
    /// ‖η^t‖²_M
    pub eta_m: f64,
    /// ∫ g ‖η^t‖₁²
    pub eta_g: f64,
}

impl EnergyPoint {
    pub fn psi(&self) -> Option<f64> {
        self.psi2.map(|p| self.psi1 + p)
    }
}

/// Kernel values on the grid s_k = k·dt and moment tables of the tail.
struct Tables {
    neg_dg: Vec<f64>,
    g: Vec<f64>,
    tail: Vec<f64>,
    decay: Option<Vec<f64>>,
}

impl Tables {
    fn new(kernel: &dyn MemoryKernel, dt: f64, len: usize, omega_g: Option<f64>) -> Self {
        let s = |k: usize| k as f64 * dt;
        Self {
            neg_dg: (0..len).map(|k| -kernel.dg(s(k))).collect(),
            g: (0..len).map(|k| kernel.g(s(k))).collect(),
            tail: (0..len).map(|k| kernel.tail(s(k))).collect(),
            // ω_g = ∞ (no memory) makes Θ vanish identically
            decay: omega_g.map(|w| {
                (0..len).map(|k| if w.is_infinite() { 0.0 } else { (-w * s(k)).exp() }).collect()
            }),
        }
    }
}

/// (∫ₜ^∞ w, ∫ₜ^∞ w (q−1), ∫ₜ^∞ w (q−1)²) for the cutoff shifted to t.
#[derive(Debug, Clone, Copy, Default)]
struct TailMoments {
    m0: f64,
    m1: f64,
    m2: f64,
}

fn tail_moments(
    kernel: &dyn MemoryKernel,
    cutoff: Option<&RhoCutoff>,
    t: f64,
    m0: f64,
    w: impl Fn(f64) -> f64,
) -> TailMoments {
    let Some(c) = cutoff else {
        return TailMoments { m0, m1: 0.0, m2: 0.0 };
    };
    let rho = c.rho();
    let bps = kernel.breakpoints();
    let mid = t + 0.5 * rho;
    let panel = 0.25 * rho;
    let flat = quad::composite(t, mid, &bps, panel, &w);
    let ramp1 = quad::composite(mid, t + rho, &bps, panel, |s| w(s) * (c.q(s - t) - 1.0));
    let ramp2 = quad::composite(mid, t + rho, &bps, panel, |s| {
        let d = c.q(s - t) - 1.0;
        w(s) * d * d
    });
    TailMoments { m0, m1: -flat + ramp1, m2: flat + ramp2 }
}

struct Evaluator<'a> {
    traj: &'a Trajectory,
    tables: Tables,
    e_rho0: f64,
}

impl<'a> Evaluator<'a> {
    fn new(traj: &'a Trajectory, omega_g: Option<f64>) -> Result<Self> {
        if traj.is_empty() {
            return Err(MgtError::Range("empty trajectory".into()));
        }
        if let Some(w) = omega_g {
            if !(w > 0.0) {
                return Err(MgtError::Precondition(format!("omega_g must be positive, got {w}")));
            }
        }
        let tables = Tables::new(traj.kernel.as_ref(), traj.dt, traj.len(), omega_g);
        let mut ev = Self { traj, tables, e_rho0: 0.0 };
        ev.e_rho0 = ev.point(0).e_rho;
        Ok(ev)
    }

    fn point(&self, n: usize) -> EnergyPoint {
        let traj = self.traj;
        let kernel = traj.kernel.as_ref();
        let p = &traj.params;
        let dt = traj.dt;
        let t = traj.time(n);
        let cutoff = traj.cutoff();
        let tb = &self.tables;
        let zero = kernel.is_zero();
        let (td, tg, tgg) = if zero {
            Default::default()
        } else {
            (
                tail_moments(kernel, cutoff.as_ref(), t, tb.g[n], |s| -kernel.dg(s)),
                tail_moments(kernel, cutoff.as_ref(), t, tb.tail[n], |s| kernel.g(s)),
                tail_moments(kernel, cutoff.as_ref(), t, 0.0, |s| kernel.tail(s)),
            )
        };
        let kappa = traj.regime.kappa;
        let stab = p.stability_number();

        let mut out = EnergyPoint { t, ..Default::default() };
        let (mut e_hist, mut psi2, mut theta, mut f) = (0.0, 0.0, 0.0, 0.0);
        let (mut w_norm, mut cross) = (0.0, 0.0);
        for (j, &lambda) in traj.spectrum.eigenvalues().iter().enumerate() {
            let m = &traj.modes[j];
            let u = m.u.samples();
            let (un, vn, wn, u0) = (u[n], m.v[n], m.w[n], u[0]);
            let (mut a_dg, mut a_g2, mut a_g1, mut a_tail, mut a_theta) = (0.0, 0.0, 0.0, 0.0, 0.0);
            if n > 0 {
                for k in 0..=n {
                    let c = if k == 0 || k == n { 0.5 * dt } else { dt };
                    let past = u[n - k];
                    let d = un - past;
                    if !zero {
                        a_dg += c * tb.neg_dg[k] * d * d;
                        a_g2 += c * tb.g[k] * d * d;
                        a_g1 += c * tb.g[k] * d;
                        a_tail += c * tb.tail[k] * past * past;
                    }
                    if let Some(dec) = &tb.decay {
                        a_theta += c * dec[k] * past * past;
                    }
                }
            }
            let eta_m = lambda * (a_dg + td.m0 * un * un + 2.0 * td.m1 * un * u0 + td.m2 * u0 * u0);
            let eta_g = lambda * (a_g2 + tg.m0 * un * un + 2.0 * tg.m1 * un * u0 + tg.m2 * u0 * u0);
            let eta_gv = lambda * vn * (a_g1 + tg.m0 * un + tg.m1 * u0);
            out.u_norm += lambda * un * un;
            out.v_norm += lambda * vn * vn;
            out.eta_m += eta_m;
            out.eta_g += eta_g;
            w_norm += wn * wn;
            e_hist += lambda * a_dg;
            cross += -(vn - p.alpha * un) * (wn + p.alpha * vn);
            psi2 += 0.5 * p.alpha * lambda * (tgg.m2 * u0 * u0 + a_tail);
            theta += lambda * a_theta;
            let vau = vn + p.alpha * un;
            let wav = wn + p.alpha * vn;
            f += (p.gamma - kappa) / p.alpha * lambda * vau * vau
                + (stab * p.alpha + kappa) / p.alpha * lambda * vn * vn
                + wav * wav
                + eta_m
                + p.alpha * eta_g
                + 2.0 * eta_gv;
        }
        let inst = out.u_norm + out.v_norm + w_norm;
        out.e = inst + e_hist;
        out.e_rho = inst + out.eta_m;
        out.psi1 = cross;
        out.f_rho = f;
        if let Some(dec) = &tb.decay {
            out.psi2 = Some(psi2);
            out.theta = Some(theta);
            let decay = if n == 0 { 1.0 } else { dec[n] };
            out.decay_term = Some(self.e_rho0 * decay);
        }
        out
    }
}

/// Sampled functionals of one trajectory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnergySeries {
    pub points: Vec<EnergyPoint>,
    pub dt: f64,
    /// spacing of the s-quadrature for the history integrals
    pub ds: f64,
    pub stride: usize,
    pub rho: f64,
    pub omega_g: Option<f64>,
    /// ε used in Λ = F_ρ + εΨ, when Λ is available
    pub epsilon: Option<f64>,
    pub lambda: Option<Vec<f64>>,
}

impl EnergySeries {
    pub fn times(&self) -> Vec<f64> {
        self.points.iter().map(|p| p.t).collect()
    }

    pub fn field(&self, name: &str) -> Result<Vec<f64>> {
        let pick = |f: &dyn Fn(&EnergyPoint) -> Option<f64>| -> Result<Vec<f64>> {
            self.points
                .iter()
                .map(|p| f(p).ok_or_else(|| MgtError::Precondition(format!("field {name} is not available"))))
                .collect()
        };
        match name {
            "E" => pick(&|p| Some(p.e)),
            "E_rho" => pick(&|p| Some(p.e_rho)),
            "F_rho" => pick(&|p| Some(p.f_rho)),
            "Psi1" => pick(&|p| Some(p.psi1)),
            "Psi2" => pick(&|p| p.psi2),
            "Theta" => pick(&|p| p.theta),
            "Lambda" => self
                .lambda
                .clone()
                .ok_or_else(|| MgtError::Precondition("Lambda is not available".into())),
            other => Err(MgtError::param(format!("unknown energy field {other}"))),
        }
    }
}

/// Evaluate every functional at the sampled times.
pub fn energy_series(traj: &Trajectory, opts: EnergyOptions) -> Result<EnergySeries> {
    let stride = opts.stride.max(1);
    let ev = Evaluator::new(traj, opts.omega_g)?;
    let last = traj.len() - 1;
    let mut idx: Vec<usize> = (0..=last).step_by(stride).collect();
    if *idx.last().unwrap() != last {
        idx.push(last);
    }
    let points = opts.execution.map_slice(&idx, |&n| ev.point(n));
    let mut series = EnergySeries {
        points,
        dt: traj.dt,
        ds: traj.dt,
        stride,
        rho: traj.rho,
        omega_g: opts.omega_g,
        epsilon: None,
        lambda: None,
    };
    if let Some(eps) = choose_epsilon(&series) {
        series.epsilon = Some(eps);
        series.lambda = Some(
            series
                .points
                .iter()
                .map(|p| p.f_rho + eps * p.psi().unwrap())
                .collect(),
        );
    }
    Ok(series)
}

/// Largest ε = 2^{−k} with ε E_ρ ≤ F_ρ + εΨ ≤ 2F_ρ + E_ρ(0)e^{−ω_g t} + Θ at
/// every sample.
fn choose_epsilon(series: &EnergySeries) -> Option<f64> {
    let pts = &series.points;
    if pts.iter().any(|p| p.psi2.is_none()) {
        return None;
    }
    let fits = |eps: f64| {
        pts.iter().all(|p| {
            let f = p.f_rho;
            let lam = f + eps * p.psi().unwrap();
            let upper = 2.0 * f + p.decay_term.unwrap() + p.theta.unwrap();
            eps * p.e_rho <= lam && lam <= upper
        })
    };
    (0..60).map(|k| 0.5f64.powi(k)).find(|&eps| fits(eps))
}

fn single(traj: &Trajectory, t: f64, omega_g: Option<f64>) -> Result<EnergyPoint> {
    let n = traj.index_of(t)?;
    Ok(Evaluator::new(traj, omega_g)?.point(n))
}

/// E(t) = ‖u‖₁² + ‖∂ₜu‖₁² + ‖∂ₜₜu‖² + ∫₀ᵗ −g′(s)‖u(t) − u(t−s)‖₁² ds.
pub fn energy_e(traj: &Trajectory, t: f64) -> Result<f64> {
    Ok(single(traj, t, None)?.e)
}

/// E_ρ(t) = ‖u‖₁² + ‖∂ₜu‖₁² + ‖∂ₜₜu‖² + ‖η^t‖²_M. On an unregularized
/// trajectory this equals E(t) + g(t)‖u(t)‖₁².
pub fn energy_e_rho(traj: &Trajectory, t: f64) -> Result<f64> {
    Ok(single(traj, t, None)?.e_rho)
}

/// The six-term functional F_ρ; requires the subcritical regime.
pub fn functional_f_rho(traj: &Trajectory, t: f64) -> Result<f64> {
    if traj.regime.regime != Regime::Subcritical {
        return Err(MgtError::Regime(format!(
            "F_rho needs a positive stability number, got {}",
            traj.params.stability_number()
        )));
    }
    Ok(single(traj, t, None)?.f_rho)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Auxiliary {
    pub psi1: f64,
    pub psi2: f64,
    pub psi: f64,
    pub theta: f64,
}

/// Ψ₁, Ψ₂, Ψ and Θ at time t, given the rate ω_g of an exponential bound on g.
pub fn auxiliary_functionals(traj: &Trajectory, t: f64, omega_g: Option<f64>) -> Result<Auxiliary> {
    let w = omega_g.ok_or_else(|| MgtError::Precondition("auxiliary functionals need a certified omega_g".into()))?;
    let p = single(traj, t, Some(w))?;
    let psi2 = p.psi2.unwrap();
    Ok(Auxiliary { psi1: p.psi1, psi2, psi: p.psi1 + psi2, theta: p.theta.unwrap() })
}
