use serde::{Deserialize, Serialize};

use crate::error::{MgtError, Result};
use crate::kernels::KernelRef;
use crate::spectral_model::{MgtParams, Spectrum, State};

use super::stepper::{solve_with, SolverOptions};
use super::trajectory::Trajectory;

/// Comparison of two consecutive runs of a ρ sweep.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceRow {
    pub rho_large: f64,
    pub rho_small: f64,
    /// max over the grid of ‖z_large(t) − z_small(t)‖_H
    pub sup_gap: f64,
    /// ‖u₀‖₁² [g(ρ_small/2) − g(ρ_large)]
    pub bound_proxy: f64,
}

#[derive(Debug, Clone)]
pub struct ConvergenceStudy {
    pub rows: Vec<ConvergenceRow>,
    pub runs: Vec<Trajectory>,
}

/// Solve for each ρ in a strictly decreasing list and compare consecutive
/// runs in the phase-space sup norm.
#[allow(clippy::too_many_arguments)]
pub fn rho_convergence_study(
    params: &MgtParams,
    kernel: KernelRef,
    spectrum: &Spectrum,
    initial: &State,
    rho_list: &[f64],
    t_end: f64,
    dt: f64,
    opts: SolverOptions,
) -> Result<ConvergenceStudy> {
    if rho_list.len() < 2 {
        return Err(MgtError::param("rho_list needs at least two values"));
    }
    if rho_list.windows(2).any(|w| !(w[1] < w[0])) || rho_list.iter().any(|&r| !(r > 0.0)) {
        return Err(MgtError::param("rho_list must be positive and strictly decreasing"));
    }
    let runs = rho_list
        .iter()
        .map(|&rho| solve_with(params, kernel.clone(), spectrum, initial, rho, t_end, dt, opts))
        .collect::<Result<Vec<_>>>()?;
    let u0_sq = initial.u.norm_sq(spectrum, 1.0);
    let rows = runs
        .windows(2)
        .map(|pair| {
            let (a, b) = (&pair[0], &pair[1]);
            let len = a.len().min(b.len());
            let mut gap = 0.0f64;
            for n in 0..len {
                let mut acc = 0.0;
                for (j, &l) in spectrum.eigenvalues().iter().enumerate() {
                    let (ma, mb) = (&a.modes[j], &b.modes[j]);
                    let du = ma.u.samples()[n] - mb.u.samples()[n];
                    let dv = ma.v[n] - mb.v[n];
                    let dw = ma.w[n] - mb.w[n];
                    acc += l * (du * du + dv * dv) + dw * dw;
                }
                gap = gap.max(acc.sqrt());
            }
            ConvergenceRow {
                rho_large: a.rho,
                rho_small: b.rho,
                sup_gap: gap,
                bound_proxy: u0_sq * (kernel.g(0.5 * b.rho) - kernel.g(a.rho)),
            }
        })
        .collect();
    Ok(ConvergenceStudy { rows, runs })
}
