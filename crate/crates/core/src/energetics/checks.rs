use serde::{Deserialize, Serialize};

use super::EnergySeries;
use crate::error::{MgtError, Result};
use crate::spectral_model::{regime_of, MgtParams, Regime};
use crate::volterra_solver::Trajectory;

/// Allowed size of the normalized dissipation margin, per unit of dt + ds.
pub const DISSIPATION_ALLOWANCE: f64 = 1.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DissipationReport {
    pub delta: f64,
    /// (t, dF/dt + 2ϰα‖∂ₜu‖₁² + δ‖η‖²_M) at interior samples
    pub margins: Vec<(f64, f64)>,
    /// max margin / (E_ρ(0)·(dt + ds)), floored at zero
    pub measured_constant: f64,
    pub allowance: f64,
    /// worst F_ρ increase between samples, normalized like the margin
    pub worst_increase: f64,
    pub ok: bool,
}

/// dF_ρ/dt + 2ϰα‖∂ₜu‖₁² ≤ −δ‖η^t‖²_M, with dF_ρ/dt by central differences.
pub fn check_dissipation(series: &EnergySeries, params: &MgtParams, delta: f64) -> Result<DissipationReport> {
    if !(series.rho > 0.0) {
        return Err(MgtError::Precondition("dissipation needs a regularized trajectory (rho > 0)".into()));
    }
    if !(delta > 0.0) {
        return Err(MgtError::Precondition(format!("delta must be positive, got {delta}")));
    }
    if regime_of(params) != Regime::Subcritical {
        return Err(MgtError::Regime("dissipation needs the subcritical regime".into()));
    }
    let f = series.field("F_rho")?;
    let pts = &series.points;
    if pts.len() < 3 {
        return Err(MgtError::Range("need at least three samples".into()));
    }
    let scale = pts[0].e_rho.max(f64::MIN_POSITIVE) * (series.dt + series.ds);
    let stab = params.stability_number();
    let margins: Vec<(f64, f64)> = (1..pts.len() - 1)
        .map(|n| {
            let dfdt = (f[n + 1] - f[n - 1]) / (pts[n + 1].t - pts[n - 1].t);
            let p = &pts[n];
            (p.t, dfdt + 2.0 * stab * params.alpha * p.v_norm + delta * p.eta_m)
        })
        .collect();
    let measured_constant = margins.iter().map(|m| m.1 / scale).fold(0.0, f64::max);
    let worst_increase = f
        .windows(2)
        .zip(pts.windows(2))
        .map(|(fw, pw)| (fw[1] - fw[0]) / ((pw[1].t - pw[0].t) * scale))
        .fold(0.0, f64::max);
    let allowance = DISSIPATION_ALLOWANCE;
    Ok(DissipationReport {
        delta,
        margins,
        measured_constant,
        allowance,
        worst_increase,
        ok: measured_constant <= allowance && worst_increase <= allowance,
    })
}

/// (γ/α)‖∂ₜu + αu‖₁² + ‖∂ₜₜu + α∂ₜu‖², constant in time for the critical
/// problem without memory.
pub fn conserved_f_critical(traj: &Trajectory, t: f64) -> Result<f64> {
    if traj.regime.regime != Regime::Critical {
        return Err(MgtError::Regime("the conserved functional needs the critical regime".into()));
    }
    if !traj.kernel.is_zero() {
        return Err(MgtError::Precondition("the conserved functional needs g = 0".into()));
    }
    let n = traj.index_of(t)?;
    let p = &traj.params;
    let mut f = 0.0;
    for (j, &lambda) in traj.spectrum.eigenvalues().iter().enumerate() {
        let m = &traj.modes[j];
        let (u, v, w) = (m.u.samples()[n], m.v[n], m.w[n]);
        f += p.gamma / p.alpha * lambda * (v + p.alpha * u).powi(2) + (w + p.alpha * v).powi(2);
    }
    Ok(f)
}

/// Measured constants of the two-sided bounds along one trajectory.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SandwichConstants {
    /// smallest C with E_ρ/C ≤ F_ρ ≤ C(E_ρ + ∫g‖η‖₁²); infinite when F_ρ is
    /// not positive at some sample
    pub f_equivalence: f64,
    /// smallest C with −C E_ρ ≤ Ψ ≤ C(E_ρ + E_ρ(0)e^{−ω_g t} + Θ)
    pub psi_bound: f64,
    pub epsilon: Option<f64>,
    pub min_psi2: f64,
    /// ∫g‖η⁰‖₁² ≤ κ‖u₀‖₁²
    pub initial_history_ok: bool,
}

pub fn sandwich_constants(series: &EnergySeries, kappa: f64) -> Result<SandwichConstants> {
    let f = series.field("F_rho")?;
    let psi2 = series.field("Psi2")?;
    let mut f_equivalence: f64 = 1.0;
    let mut psi_bound: f64 = 0.0;
    for (p, &fv) in series.points.iter().zip(&f) {
        if p.e_rho > 0.0 {
            f_equivalence = if fv > 0.0 {
                f_equivalence.max(p.e_rho / fv).max(fv / (p.e_rho + p.eta_g))
            } else {
                f64::INFINITY
            };
            let psi = p.psi().unwrap();
            psi_bound = psi_bound
                .max(-psi / p.e_rho)
                .max(psi / (p.e_rho + p.decay_term.unwrap() + p.theta.unwrap()));
        }
    }
    let p0 = &series.points[0];
    Ok(SandwichConstants {
        f_equivalence,
        psi_bound,
        epsilon: series.epsilon,
        min_psi2: psi2.iter().copied().fold(f64::INFINITY, f64::min),
        initial_history_ok: p0.eta_g <= kappa * p0.u_norm * (1.0 + 1e-9) + 1e-15,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThetaExchange {
    pub omega: f64,
    /// ∫₀ᵀ e^{ωs}Θ(s) ds
    pub lhs: f64,
    /// (ω_g − ω)^{−1} ∫₀ᵀ e^{ωs}‖u(s)‖₁² ds
    pub rhs: f64,
    pub holds: bool,
}

pub fn theta_exchange_check(series: &EnergySeries, omega: f64) -> Result<ThetaExchange> {
    let omega_g = series
        .omega_g
        .ok_or_else(|| MgtError::Precondition("Theta needs omega_g".into()))?;
    if !(omega >= 0.0 && omega < omega_g) {
        return Err(MgtError::Precondition(format!("need 0 <= omega < omega_g = {omega_g}, got {omega}")));
    }
    let theta = series.field("Theta")?;
    let trap = |vals: &dyn Fn(usize) -> f64| {
        series
            .points
            .windows(2)
            .enumerate()
            .map(|(i, w)| 0.5 * (w[1].t - w[0].t) * (vals(i) + vals(i + 1)))
            .sum::<f64>()
    };
    let e = |i: usize| (omega * series.points[i].t).exp();
    let lhs = trap(&|i| e(i) * theta[i]);
    let rhs = trap(&|i| e(i) * series.points[i].u_norm) / (omega_g - omega);
    Ok(ThetaExchange { omega, lhs, rhs, holds: lhs <= rhs * (1.0 + 1e-9) })
}

