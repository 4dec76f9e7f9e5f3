//! Memory kernels g and their derived quantities.

mod exponential;
mod oscillating;
mod staircase;
mod tabulated;

use std::fmt;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{MgtError, Result};

pub use exponential::ExponentialKernel;
pub use oscillating::OscillatingKernel;
pub use staircase::StaircaseKernel;
pub use tabulated::TabulatedKernel;

/// A relaxation kernel g on (0, ∞).
///
/// Implementations are immutable once built and are shared between the
/// per-mode solvers through `Arc<dyn MemoryKernel>`.
pub trait MemoryKernel: Send + Sync + fmt::Debug {
    fn name(&self) -> String;

    fn g(&self, s: f64) -> f64;

    fn dg(&self, s: f64) -> f64;

    /// Second derivative; one-sided (from the right) at kinks.
    fn d2g(&self, s: f64) -> f64;

    /// Total mass κ = ∫₀^∞ g.
    fn mass(&self) -> f64;

    /// G(s) = ∫ₛ^∞ g(y) dy.
    fn tail(&self, s: f64) -> f64;

    fn ln_g(&self, s: f64) -> f64 {
        self.g(s).ln()
    }

    /// ln(−g′(s)).
    fn ln_neg_dg(&self, s: f64) -> f64 {
        (-self.dg(s)).ln()
    }

    /// The ratios (g′/g, g″/g). Kernels whose values underflow override this
    /// with a log-space evaluation.
    fn log_ratios(&self, s: f64) -> (f64, f64) {
        let g = self.g(s);
        (self.dg(s) / g, self.d2g(s) / g)
    }

    fn is_zero(&self) -> bool {
        false
    }

    /// Points where g″ may jump. Quadratures split there.
    fn breakpoints(&self) -> Vec<f64> {
        Vec::new()
    }

    /// Extra points an audit grid should contain.
    fn audit_probes(&self) -> Vec<f64> {
        Vec::new()
    }

    /// Smallest a = α − δ for which (α − δ)g′ − g″ ≤ 0 is known analytically.
    fn curvature_threshold(&self) -> Option<f64> {
        None
    }

    /// Analytic (M_g, ω_g) with g(s) ≤ M_g e^{−ω_g s}, when known.
    fn exp_bound(&self) -> Option<(f64, f64)> {
        None
    }

    /// Closed form of ∫ₜ^{t+ρ} g(s)[1 − q_ρ(s − t)] ds, when available.
    fn cutoff_integral(&self, _t: f64, _rho: f64) -> Option<f64> {
        None
    }

    /// A δ for which the curvature bound is certified at the given α: the largest δ with
    /// α − δ ≥ max(threshold, α/2).
    fn certified_delta(&self, alpha: f64) -> Option<f64> {
        let a = self.curvature_threshold()?;
        let d = alpha - a.max(0.5 * alpha);
        (d > 0.0).then_some(d)
    }

    /// A point beyond which g < rel · g(0).
    fn support_end(&self, rel: f64) -> f64 {
        if self.is_zero() {
            return 0.0;
        }
        let target = self.ln_g(0.0) + rel.ln();
        let mut s = 1.0;
        while self.ln_g(s) >= target && s < 1e6 {
            s *= 2.0;
        }
        s
    }
}

pub type KernelRef = Arc<dyn MemoryKernel>;

/// The kernel g ≡ 0 (plain MGT equation).
#[derive(Debug, Clone, Copy, Default)]
pub struct ZeroKernel;

impl MemoryKernel for ZeroKernel {
    fn name(&self) -> String {
        "zero".into()
    }
    fn g(&self, _s: f64) -> f64 {
        0.0
    }
    fn dg(&self, _s: f64) -> f64 {
        0.0
    }
    fn d2g(&self, _s: f64) -> f64 {
        0.0
    }
    fn mass(&self) -> f64 {
        0.0
    }
    fn tail(&self, _s: f64) -> f64 {
        0.0
    }
    fn ln_g(&self, _s: f64) -> f64 {
        f64::NEG_INFINITY
    }
    fn ln_neg_dg(&self, _s: f64) -> f64 {
        f64::NEG_INFINITY
    }
    fn log_ratios(&self, _s: f64) -> (f64, f64) {
        (0.0, 0.0)
    }
    fn is_zero(&self) -> bool {
        true
    }
    fn curvature_threshold(&self) -> Option<f64> {
        Some(f64::NEG_INFINITY)
    }
    fn cutoff_integral(&self, _t: f64, _rho: f64) -> Option<f64> {
        Some(0.0)
    }
}

/// c · g for a positive constant c.
#[derive(Debug, Clone)]
pub struct ScaledKernel {
    inner: KernelRef,
    factor: f64,
}

impl ScaledKernel {
    pub fn new(inner: KernelRef, factor: f64) -> Result<Self> {
        if !(factor > 0.0 && factor.is_finite()) {
            return Err(MgtError::param(format!("kernel scale must be positive, got {factor}")));
        }
        Ok(Self { inner, factor })
    }
}

impl MemoryKernel for ScaledKernel {
    fn name(&self) -> String {
        format!("{}*{}", self.factor, self.inner.name())
    }
    fn g(&self, s: f64) -> f64 {
        self.factor * self.inner.g(s)
    }
    fn dg(&self, s: f64) -> f64 {
        self.factor * self.inner.dg(s)
    }
    fn d2g(&self, s: f64) -> f64 {
        self.factor * self.inner.d2g(s)
    }
    fn mass(&self) -> f64 {
        self.factor * self.inner.mass()
    }
    fn tail(&self, s: f64) -> f64 {
        self.factor * self.inner.tail(s)
    }
    fn ln_g(&self, s: f64) -> f64 {
        self.factor.ln() + self.inner.ln_g(s)
    }
    fn ln_neg_dg(&self, s: f64) -> f64 {
        self.factor.ln() + self.inner.ln_neg_dg(s)
    }
    fn log_ratios(&self, s: f64) -> (f64, f64) {
        self.inner.log_ratios(s)
    }
    fn is_zero(&self) -> bool {
        self.inner.is_zero()
    }
    fn breakpoints(&self) -> Vec<f64> {
        self.inner.breakpoints()
    }
    fn audit_probes(&self) -> Vec<f64> {
        self.inner.audit_probes()
    }
    fn curvature_threshold(&self) -> Option<f64> {
        self.inner.curvature_threshold()
    }
    fn exp_bound(&self) -> Option<(f64, f64)> {
        self.inner.exp_bound().map(|(m, w)| (self.factor * m, w))
    }
    fn cutoff_integral(&self, t: f64, rho: f64) -> Option<f64> {
        self.inner.cutoff_integral(t, rho).map(|q| self.factor * q)
    }
    fn support_end(&self, rel: f64) -> f64 {
        self.inner.support_end(rel)
    }
}

/// Kernel description as it appears in configuration files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase", deny_unknown_fields)]
pub enum KernelSpec {
    Exponential {
        k: f64,
        nu: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        scale: Option<f64>,
    },
    Oscillating {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        scale: Option<f64>,
    },
    Staircase {
        n_max: usize,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        scale: Option<f64>,
    },
    Tabulated {
        path: PathBuf,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        scale: Option<f64>,
    },
    #[serde(alias = "none")]
    Zero,
}

impl KernelSpec {
    /// Build the kernel. Relative tabulated paths resolve against `base_dir`.
    pub fn build(&self, base_dir: Option<&Path>) -> Result<KernelRef> {
        let (kernel, scale): (KernelRef, Option<f64>) = match self {
            KernelSpec::Exponential { k, nu, scale } => (Arc::new(make_exponential(*k, *nu)?), *scale),
            KernelSpec::Oscillating { scale } => (Arc::new(make_oscillating()), *scale),
            KernelSpec::Staircase { n_max, scale } => (Arc::new(make_staircase(*n_max)?), *scale),
            KernelSpec::Tabulated { path, scale } => {
                let full = match base_dir {
                    Some(dir) if path.is_relative() => dir.join(path),
                    _ => path.clone(),
                };
                (Arc::new(TabulatedKernel::from_csv_path(&full)?), *scale)
            }
            KernelSpec::Zero => (Arc::new(ZeroKernel), None),
        };
        match scale {
            None | Some(1.0) => Ok(kernel),
            Some(c) => Ok(Arc::new(ScaledKernel::new(kernel, c)?)),
        }
    }
}

pub fn make_exponential(k: f64, nu: f64) -> Result<ExponentialKernel> {
    ExponentialKernel::new(k, nu)
}

pub fn make_oscillating() -> OscillatingKernel {
    OscillatingKernel
}

pub fn make_staircase(n_max: usize) -> Result<StaircaseKernel> {
    StaircaseKernel::new(n_max)
}

/// G(s) for any kernel, rejecting negative arguments.
pub fn tail_integral(kernel: &dyn MemoryKernel, s: f64) -> Result<f64> {
    if !(s >= 0.0) {
        return Err(MgtError::param(format!("tail integral needs s >= 0, got {s}")));
    }
    let v = kernel.tail(s);
    if !v.is_finite() {
        return Err(MgtError::Numerical(format!("tail integral at s = {s} is not finite")));
    }
    Ok(v)
}

/// (∫ₓ^{x+h} e^{−r(y−x)} dy, ∫ₓ^{x+h} (y−x) e^{−r(y−x)} dy), with h = ∞ allowed
/// when r > 0.
pub(crate) fn exp_moments(r: f64, h: f64) -> (f64, f64) {
    if h.is_infinite() {
        return (1.0 / r, 1.0 / (r * r));
    }
    let z = r * h;
    if z.abs() < 1e-6 {
        let m0 = h * (1.0 - z / 2.0 + z * z / 6.0);
        let m1 = h * h * (0.5 - z / 3.0 + z * z / 8.0);
        return (m0, m1);
    }
    let e = (-z).exp();
    let m0 = -(-z).exp_m1() / r;
    let m1 = (-(-z).exp_m1() - z * e) / (r * r);
    (m0, m1)
}

pub(crate) fn log_add_exp(a: f64, b: f64) -> f64 {
    if a == f64::NEG_INFINITY {
        return b;
    }
    if b == f64::NEG_INFINITY {
        return a;
    }
    let m = a.max(b);
    m + ((a - m).exp() + (b - m).exp()).ln()
}
