//! Quadrature helpers shared by the kernels, the solver and the energy code.

use std::num::NonZeroUsize;
use std::sync::OnceLock;

use gauss_quad::legendre::GaussLegendre;

use crate::error::{MgtError, Result};

fn rule() -> &'static GaussLegendre {
    static RULE: OnceLock<GaussLegendre> = OnceLock::new();
    RULE.get_or_init(|| GaussLegendre::new(NonZeroUsize::new(20).unwrap()))
}

/// 20-point Gauss-Legendre on `[a, b]`.
pub(crate) fn gauss<F: FnMut(f64) -> f64>(a: f64, b: f64, f: F) -> f64 {
    if b <= a {
        return 0.0;
    }
    rule().integrate(a, b, f)
}

/// Composite Gauss-Legendre on `[a, b]`, split at every breakpoint inside
/// the interval and into panels no longer than `panel`.
pub(crate) fn composite<F: FnMut(f64) -> f64>(
    a: f64,
    b: f64,
    breakpoints: &[f64],
    panel: f64,
    mut f: F,
) -> f64 {
    if b <= a {
        return 0.0;
    }
    let mut cuts = vec![a];
    cuts.extend(breakpoints.iter().copied().filter(|&x| x > a && x < b));
    cuts.push(b);
    let mut total = 0.0;
    for w in cuts.windows(2) {
        let (lo, hi) = (w[0], w[1]);
        let pieces = ((hi - lo) / panel).ceil().max(1.0) as usize;
        let h = (hi - lo) / pieces as f64;
        for i in 0..pieces {
            let x0 = lo + i as f64 * h;
            let x1 = if i + 1 == pieces { hi } else { x0 + h };
            total += gauss(x0, x1, &mut f);
        }
    }
    total
}

/// Double-exponential quadrature with a relative accuracy target measured
/// against `scale`, bisecting the interval while the error estimate misses.
pub(crate) fn adaptive<F: Fn(f64) -> f64>(a: f64, b: f64, rel_tol: f64, scale: f64, f: F) -> Result<f64> {
    if b <= a {
        return Ok(0.0);
    }
    let target = (rel_tol * scale.abs()).max(f64::MIN_POSITIVE);
    let floor = 1e-16 * scale.abs();
    bisect(&f, a, b, target, floor, 0)
}

fn bisect<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, target: f64, floor: f64, depth: u32) -> Result<f64> {
    let out = quadrature::integrate(f, a, b, target);
    if !out.integral.is_finite() {
        return Err(MgtError::Numerical(format!(
            "quadrature on [{a}, {b}] returned a non-finite value"
        )));
    }
    if out.error_estimate <= target.max(floor) || out.error_estimate <= 1e-15 * out.integral.abs() {
        return Ok(out.integral);
    }
    if depth >= 16 {
        return Err(MgtError::Numerical(format!(
            "quadrature on [{a}, {b}] did not converge: estimate {:.3e} vs target {:.3e}",
            out.error_estimate, target
        )));
    }
    let m = 0.5 * (a + b);
    Ok(bisect(f, a, m, 0.5 * target, floor, depth + 1)? + bisect(f, m, b, 0.5 * target, floor, depth + 1)?)
}

/// `adaptive` applied piecewise between the breakpoints inside `[a, b]`.
pub(crate) fn adaptive_split<F: Fn(f64) -> f64>(
    a: f64,
    b: f64,
    breakpoints: &[f64],
    rel_tol: f64,
    scale: f64,
    f: F,
) -> Result<f64> {
    let mut cuts = vec![a];
    cuts.extend(breakpoints.iter().copied().filter(|&x| x > a && x < b));
    cuts.push(b);
    let mut total = 0.0;
    for w in cuts.windows(2) {
        total += adaptive(w[0], w[1], rel_tol, scale, &f)?;
    }
    Ok(total)
}
