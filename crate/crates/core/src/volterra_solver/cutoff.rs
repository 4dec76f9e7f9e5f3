use serde::{Deserialize, Serialize};

use crate::error::{MgtError, Result};
use crate::kernels::MemoryKernel;
use crate::quad;

/// The cutoff profile q_ρ: 0 on [0, ρ/2], linear up to 1 at ρ, then 1.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RhoCutoff {
    rho: f64,
}

impl RhoCutoff {
    pub fn new(rho: f64) -> Result<Self> {
        if !(rho > 0.0 && rho.is_finite()) {
            return Err(MgtError::param(format!("rho must be positive, got {rho}")));
        }
        Ok(Self { rho })
    }

    pub fn rho(&self) -> f64 {
        self.rho
    }

    pub fn q(&self, s: f64) -> f64 {
        if s <= 0.5 * self.rho {
            0.0
        } else if s >= self.rho {
            1.0
        } else {
            2.0 * s / self.rho - 1.0
        }
    }
}

/// q_ρ for an optional cutoff; without one (ρ = 0) q ≡ 1 on s > 0.
pub(crate) fn q_or_one(cutoff: Option<&RhoCutoff>, s: f64) -> f64 {
    match cutoff {
        Some(c) => c.q(s),
        None => {
            if s > 0.0 {
                1.0
            } else {
                0.0
            }
        }
    }
}

/// Q_ρ(t) = ∫ₜ^{t+ρ} g(s)[1 − q_ρ(s − t)] ds.
pub fn q_rho_integral(kernel: &dyn MemoryKernel, cutoff: &RhoCutoff, t: f64) -> Result<f64> {
    if !(t >= 0.0) {
        return Err(MgtError::param(format!("Q_rho needs t >= 0, got {t}")));
    }
    if kernel.is_zero() {
        return Ok(0.0);
    }
    let rho = cutoff.rho;
    if let Some(q) = kernel.cutoff_integral(t, rho) {
        return Ok(q);
    }
    let bps = kernel.breakpoints();
    let scale = rho * kernel.g(t);
    let mid = t + 0.5 * rho;
    let flat = quad::adaptive_split(t, mid, &bps, 1e-12, scale, |s| kernel.g(s))?;
    let ramp = quad::adaptive_split(mid, t + rho, &bps, 1e-12, scale, |s| {
        kernel.g(s) * (2.0 - 2.0 * (s - t) / rho)
    })?;
    Ok(flat + ramp)
}
