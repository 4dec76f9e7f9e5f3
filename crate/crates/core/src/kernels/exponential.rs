use crate::error::{MgtError, Result};

use super::MemoryKernel;

/// g(s) = k e^{−νs}.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExponentialKernel {
    pub k: f64,
    pub nu: f64,
}

impl ExponentialKernel {
    pub fn new(k: f64, nu: f64) -> Result<Self> {
        if !(k > 0.0 && k.is_finite()) {
            return Err(MgtError::param(format!("exponential kernel needs k > 0, got {k}")));
        }
        if !(nu > 0.0 && nu.is_finite()) {
            return Err(MgtError::param(format!("exponential kernel needs nu > 0, got {nu}")));
        }
        Ok(Self { k, nu })
    }
}

impl MemoryKernel for ExponentialKernel {
    fn name(&self) -> String {
        format!("exponential(k={}, nu={})", self.k, self.nu)
    }

    fn g(&self, s: f64) -> f64 {
        self.k * (-self.nu * s).exp()
    }

    fn dg(&self, s: f64) -> f64 {
        -self.nu * self.g(s)
    }

    fn d2g(&self, s: f64) -> f64 {
        self.nu * self.nu * self.g(s)
    }

    fn mass(&self) -> f64 {
        self.k / self.nu
    }

    fn tail(&self, s: f64) -> f64 {
        self.k / self.nu * (-self.nu * s).exp()
    }

    fn ln_g(&self, s: f64) -> f64 {
        self.k.ln() - self.nu * s
    }

    fn ln_neg_dg(&self, s: f64) -> f64 {
        (self.k * self.nu).ln() - self.nu * s
    }

    fn log_ratios(&self, _s: f64) -> (f64, f64) {
        (-self.nu, self.nu * self.nu)
    }

    fn curvature_threshold(&self) -> Option<f64> {
        Some(-self.nu)
    }

    fn exp_bound(&self) -> Option<(f64, f64)> {
        Some((self.k, self.nu))
    }

    fn cutoff_integral(&self, t: f64, rho: f64) -> Option<f64> {
        if rho <= 0.0 {
            return Some(0.0);
        }
        let nu = self.nu;
        let half = 0.5 * rho;
        // ∫₀^{ρ/2} e^{−νx} dx
        let flat = -(-nu * half).exp_m1() / nu;
        // ∫_{ρ/2}^{ρ} e^{−νx}(2 − 2x/ρ) dx, written with z = ρ − x
        let (_, m1) = super::exp_moments(-nu, half);
        let ramp = 2.0 / rho * (-nu * rho).exp() * m1;
        Some(self.g(t) * (flat + ramp))
    }

    fn support_end(&self, rel: f64) -> f64 {
        -rel.ln() / self.nu
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mass_and_tail() {
        let g = ExponentialKernel::new(1.0, 1.0).unwrap();
        assert_eq!(g.mass(), 1.0);
        assert_eq!(g.tail(0.0), 1.0);
        assert!((g.tail(1.0) - (-1f64).exp()).abs() < 1e-16);
        assert!((g.g(2f64.ln()) - 0.5).abs() < 1e-16);
        assert_eq!(ExponentialKernel::new(2.0, 4.0).unwrap().mass(), 0.5);
    }

    #[test]
    fn rejects_nonpositive() {
        assert!(ExponentialKernel::new(0.0, 1.0).is_err());
        assert!(ExponentialKernel::new(1.0, -1.0).is_err());
    }

    #[test]
    fn cutoff_integral_reference_value() {
        // piecewise antiderivative evaluated to 30 digits offline
        let g = ExponentialKernel::new(1.0, 1.0).unwrap();
        let q = g.cutoff_integral(0.0, 1.0).unwrap();
        assert!((q - 0.522_697_562_917_617_8).abs() < 1e-15, "{q}");
    }
}
