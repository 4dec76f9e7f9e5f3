//! Grid-based certification and refutation of kernel hypotheses.
//!
//! Every check is evaluated through the ratios g′/g and g″/g, so results do
//! not depend on the overall size of g and stay meaningful where g itself
//! underflows.

use serde::{Deserialize, Serialize, Serializer};

use crate::error::{MgtError, Result};
use crate::exec::Execution;
use crate::kernels::MemoryKernel;

pub const DEFAULT_TOLERANCE: f64 = 1e-10;
const MIN_POINTS: usize = 1000;

/// Sample points for the audit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuditGrid {
    pub points: Vec<f64>,
    pub tolerance: f64,
}

impl AuditGrid {
    pub fn new(points: Vec<f64>, tolerance: f64) -> Result<Self> {
        if points.len() < MIN_POINTS {
            return Err(MgtError::Resolution(format!(
                "audit grid has {} points, at least {MIN_POINTS} required",
                points.len()
            )));
        }
        if !(points[0] > 0.0) || points.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(MgtError::param("audit grid must be positive and strictly increasing"));
        }
        if !(tolerance >= 0.0) {
            return Err(MgtError::param("audit tolerance must be nonnegative"));
        }
        Ok(Self { points, tolerance })
    }

    /// Geometric points on (1e−6, h), uniform points of step h up to S_max,
    /// plus the kernel's own probe points. S_max is where g drops below
    /// 1e−14 g(0).
    pub fn for_kernel(kernel: &dyn MemoryKernel) -> Self {
        let s_max = kernel.support_end(1e-14).max(1.0);
        let h = (s_max / 1000.0).min(0.01);
        let mut pts = Vec::new();
        let n_geo = 60;
        let ratio = (h / 1e-6f64).ln() / n_geo as f64;
        for i in 0..n_geo {
            pts.push(1e-6 * (ratio * i as f64).exp());
        }
        let n_uni = (s_max / h).round() as usize;
        for i in 1..=n_uni {
            pts.push(i as f64 * h);
        }
        pts.extend(kernel.audit_probes().into_iter().filter(|&p| p > 0.0));
        pts.extend(kernel.breakpoints());
        pts.sort_by(|a, b| a.partial_cmp(b).unwrap());
        pts.dedup_by(|a, b| (*a - *b).abs() <= 1e-12 * b.abs());
        Self { points: pts, tolerance: DEFAULT_TOLERANCE }
    }

    pub fn summary(&self) -> GridSummary {
        GridSummary {
            n_points: self.points.len(),
            s_min: self.points[0],
            s_max: *self.points.last().unwrap(),
            tolerance: self.tolerance,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSummary {
    pub n_points: usize,
    pub s_min: f64,
    pub s_max: f64,
    pub tolerance: f64,
}

/// Result of a pointwise "≤ 0" check. `worst_margin` is the largest value of
/// the checked expression divided by its local scale.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CheckOutcome {
    pub ok: bool,
    pub worst_margin: f64,
    pub worst_point: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub delta: Option<f64>,
}

fn worst_of(points: &[f64], margins: &[f64], tol: f64, delta: Option<f64>) -> CheckOutcome {
    let mut best = (f64::NEG_INFINITY, points[0]);
    for (&s, &m) in points.iter().zip(margins) {
        if m > best.0 || m.is_nan() {
            best = (m, s);
        }
    }
    CheckOutcome { ok: best.0 <= tol, worst_margin: best.0, worst_point: best.1, delta }
}

fn relative(value: f64, scale: f64) -> f64 {
    if scale == 0.0 {
        if value == 0.0 {
            0.0
        } else {
            value.signum() * f64::INFINITY
        }
    } else {
        value / scale
    }
}

/// (α − δ)g′ − g″ ≤ 0 on the grid.
pub fn check_curvature_bound(
    kernel: &dyn MemoryKernel,
    alpha: f64,
    delta: f64,
    grid: &AuditGrid,
    exec: Execution,
) -> Result<CheckOutcome> {
    if !(delta > 0.0 && delta < alpha) {
        return Err(MgtError::param(format!("curvature check needs 0 < delta < alpha, got delta={delta}, alpha={alpha}")));
    }
    let a = alpha - delta;
    let margins = exec.map_slice(&grid.points, |&s| {
        let (r1, r2) = kernel.log_ratios(s);
        relative(a * r1 - r2, r1.abs().max(r2.abs()))
    });
    Ok(worst_of(&grid.points, &margins, grid.tolerance, Some(delta)))
}

/// Dafermos inequality g′ + δg ≤ 0 on the grid.
pub fn check_dafermos(kernel: &dyn MemoryKernel, delta: f64, grid: &AuditGrid, exec: Execution) -> Result<CheckOutcome> {
    if !(delta > 0.0) {
        return Err(MgtError::param(format!("Dafermos check needs delta > 0, got {delta}")));
    }
    let margins = exec.map_slice(&grid.points, |&s| {
        if kernel.is_zero() {
            return 0.0;
        }
        let (r1, _) = kernel.log_ratios(s);
        relative(r1 + delta, r1.abs().max(delta))
    });
    Ok(worst_of(&grid.points, &margins, grid.tolerance, Some(delta)))
}

/// g ≥ 0 and g′ ≤ 0 on the grid.
pub fn check_nonincreasing(kernel: &dyn MemoryKernel, grid: &AuditGrid, exec: Execution) -> CheckOutcome {
    let margins = exec.map_slice(&grid.points, |&s| {
        if kernel.is_zero() {
            return 0.0;
        }
        let g = kernel.g(s);
        if g < 0.0 {
            return f64::INFINITY;
        }
        let (r1, _) = kernel.log_ratios(s);
        relative(r1, r1.abs())
    });
    worst_of(&grid.points, &margins, grid.tolerance, None)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConvexityOutcome {
    pub convex: bool,
    /// point where g″/g is smallest
    pub worst_point: f64,
    pub worst_ratio: f64,
}

/// g″ ≥ 0 on the grid, with a witness of the most negative curvature.
pub fn check_convexity(kernel: &dyn MemoryKernel, grid: &AuditGrid, exec: Execution) -> ConvexityOutcome {
    let ratios = exec.map_slice(&grid.points, |&s| {
        if kernel.is_zero() {
            return (0.0, 0.0);
        }
        let (r1, r2) = kernel.log_ratios(s);
        (r2, r1.abs().max(r2.abs()))
    });
    let mut worst = (f64::INFINITY, grid.points[0], 1.0);
    for (&s, &(r2, scale)) in grid.points.iter().zip(&ratios) {
        if r2 < worst.0 {
            worst = (r2, s, scale);
        }
    }
    ConvexityOutcome {
        convex: worst.0 >= -grid.tolerance * worst.2,
        worst_point: worst.1,
        worst_ratio: worst.0,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MassOutcome {
    pub kappa: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gamma: Option<f64>,
    /// κ < γ, when γ is known
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ok: Option<bool>,
}

pub fn check_mass(kernel: &dyn MemoryKernel, gamma: Option<f64>) -> MassOutcome {
    let kappa = kernel.mass();
    MassOutcome { kappa, gamma, ok: gamma.map(|g| kernel.is_zero() || kappa < g) }
}

fn ser_extended<S: Serializer>(x: &f64, s: S) -> std::result::Result<S::Ok, S::Error> {
    if x.is_infinite() {
        s.serialize_str(if *x > 0.0 { "inf" } else { "-inf" })
    } else {
        s.serialize_f64(*x)
    }
}

fn de_extended<'de, D: serde::Deserializer<'de>>(d: D) -> std::result::Result<f64, D::Error> {
    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Num {
        F(f64),
        S(String),
    }
    match Num::deserialize(d)? {
        Num::F(x) => Ok(x),
        Num::S(s) if s == "inf" => Ok(f64::INFINITY),
        Num::S(s) if s == "-inf" => Ok(f64::NEG_INFINITY),
        Num::S(s) => Err(serde::de::Error::custom(format!("not a number: {s}"))),
    }
}

/// Fitted bound g(s) ≤ M_g e^{−ω_g s}.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExpBoundOutcome {
    pub m_g: f64,
    /// +∞ when the kernel vanishes on the grid
    #[serde(serialize_with = "ser_extended", deserialize_with = "de_extended")]
    pub omega_g: f64,
    /// largest log-gap between the fitted line and ln g on the grid
    pub max_log_residual: f64,
    /// ω_g > 0
    pub ok: bool,
    /// the kernel's analytic bound, if it has one, and whether it holds on the grid
    #[serde(skip_serializing_if = "Option::is_none")]
    pub analytic: Option<AnalyticBound>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AnalyticBound {
    pub m_g: f64,
    pub omega_g: f64,
    pub holds: bool,
}

/// Tightest line ln M − ωs lying above ln g on the grid, in the sense of the
/// smallest maximal log-gap.
pub fn check_exponential_bound(kernel: &dyn MemoryKernel, grid: &AuditGrid, exec: Execution) -> ExpBoundOutcome {
    let data: Vec<(f64, f64)> = exec
        .map_slice(&grid.points, |&s| (s, kernel.ln_g(s)))
        .into_iter()
        .filter(|p| p.1.is_finite())
        .collect();
    if data.is_empty() {
        return ExpBoundOutcome {
            m_g: 0.0,
            omega_g: f64::INFINITY,
            max_log_residual: 0.0,
            ok: true,
            analytic: None,
        };
    }
    // for fixed ω the best ln M is max(y + ωs); the resulting spread is convex in ω
    let spread = |w: f64| {
        let (mut hi, mut lo) = (f64::NEG_INFINITY, f64::INFINITY);
        for &(s, y) in &data {
            let z = y + w * s;
            hi = hi.max(z);
            lo = lo.min(z);
        }
        (hi - lo, hi)
    };
    let (mut a, mut b) = (-50.0f64, 50.0f64);
    let phi = 0.5 * (5f64.sqrt() - 1.0);
    let mut x1 = b - phi * (b - a);
    let mut x2 = a + phi * (b - a);
    let (mut f1, mut f2) = (spread(x1).0, spread(x2).0);
    while b - a > 1e-13 * (1.0 + a.abs().max(b.abs())) {
        if f1 <= f2 {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - phi * (b - a);
            f1 = spread(x1).0;
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + phi * (b - a);
            f2 = spread(x2).0;
        }
    }
    let omega = 0.5 * (a + b);
    let (resid, ln_m) = spread(omega);
    let analytic = kernel.exp_bound().map(|(m, w)| {
        let holds = data.iter().all(|&(s, y)| y <= m.ln() - w * s + grid.tolerance);
        AnalyticBound { m_g: m, omega_g: w, holds }
    });
    ExpBoundOutcome { m_g: ln_m.exp(), omega_g: omega, max_log_residual: resid, ok: omega > 0.0, analytic }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TranslationOutcome {
    pub ok: bool,
    /// largest value of ln(−g′(s+t)) − ln(−g′(s)) − (α−δ)t
    pub worst_margin: f64,
    pub worst_s: f64,
    pub worst_t: f64,
}

/// −g′(s+t) ≤ −g′(s)e^{(α−δ)t} on all grid pairs, compared in log form.
pub fn check_translation_bound(
    kernel: &dyn MemoryKernel,
    alpha: f64,
    delta: f64,
    s_grid: &[f64],
    t_grid: &[f64],
    tolerance: f64,
    exec: Execution,
) -> Result<TranslationOutcome> {
    if !(delta > 0.0 && delta < alpha) {
        return Err(MgtError::param(format!("translation check needs 0 < delta < alpha, got delta={delta}, alpha={alpha}")));
    }
    let a = alpha - delta;
    let rows = exec.map_slice(s_grid, |&s| {
        let base = kernel.ln_neg_dg(s);
        let mut worst = (f64::NEG_INFINITY, 0.0);
        for &t in t_grid {
            let shifted = kernel.ln_neg_dg(s + t);
            let m = if shifted == f64::NEG_INFINITY {
                f64::NEG_INFINITY
            } else if base == f64::NEG_INFINITY {
                f64::INFINITY
            } else {
                shifted - base - a * t
            };
            if m > worst.0 {
                worst = (m, t);
            }
        }
        (s, worst.0, worst.1)
    });
    let mut best = (f64::NEG_INFINITY, s_grid[0], t_grid[0]);
    for (s, m, t) in rows {
        if m > best.0 {
            best = (m, s, t);
        }
    }
    Ok(TranslationOutcome { ok: best.0 <= tolerance, worst_margin: best.0, worst_s: best.1, worst_t: best.2 })
}

/// Full audit of one kernel.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KernelReport {
    pub kernel: String,
    pub alpha: f64,
    pub delta: f64,
    pub grid: GridSummary,
    pub mass_below_gamma: MassOutcome,
    pub nonincreasing: CheckOutcome,
    pub curvature_bound: CheckOutcome,
    pub dafermos: CheckOutcome,
    pub exp_bound: ExpBoundOutcome,
    pub convexity: ConvexityOutcome,
    pub translation_bound: TranslationOutcome,
}

impl KernelReport {
    /// Mass, monotonicity and curvature conditions all hold.
    pub fn hypotheses_hold(&self) -> bool {
        self.mass_below_gamma.ok.unwrap_or(true) && self.nonincreasing.ok && self.curvature_bound.ok
    }
}

/// Run every check. The Dafermos check uses the same δ as the curvature check.
pub fn audit_kernel(
    kernel: &dyn MemoryKernel,
    alpha: f64,
    delta: f64,
    gamma: Option<f64>,
    grid: &AuditGrid,
    exec: Execution,
) -> Result<KernelReport> {
    let curvature_bound = check_curvature_bound(kernel, alpha, delta, grid, exec)?;
    let dafermos = check_dafermos(kernel, delta, grid, exec)?;
    let s_max = grid.summary().s_max;
    let s_grid: Vec<f64> = (0..100).map(|i| s_max * (i as f64 + 0.5) / 100.0).collect();
    let t_grid: Vec<f64> = (0..100).map(|i| s_max * (i as f64 + 1.0) / 200.0).collect();
    let translation_bound = check_translation_bound(kernel, alpha, delta, &s_grid, &t_grid, grid.tolerance.max(1e-9), exec)?;
    Ok(KernelReport {
        kernel: kernel.name(),
        alpha,
        delta,
        grid: grid.summary(),
        mass_below_gamma: check_mass(kernel, gamma),
        nonincreasing: check_nonincreasing(kernel, grid, exec),
        curvature_bound,
        dafermos,
        exp_bound: check_exponential_bound(kernel, grid, exec),
        convexity: check_convexity(kernel, grid, exec),
        translation_bound,
    })
}
