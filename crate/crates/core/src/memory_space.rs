//! The history space M = L²_{−g′}(ℝ⁺; H¹) on a finite s-grid.
//!
//! Integrals over (0, ∞) use the trapezoidal rule on the grid. Past the last
//! grid point a history is continued by its last value, so the tail of
//! ∫ −g′(s)⟨η₁, η₂⟩₁ is g(S)⟨η₁(S), η₂(S)⟩₁.

use serde::{Deserialize, Serialize};

use crate::error::{MgtError, Result};
use crate::kernels::KernelRef;
use crate::spectral_model::{ModalVector, Spectrum};

/// Modal values of a history η on an increasing grid of s ≥ 0.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HistoryFunction {
    pub s: Vec<f64>,
    pub values: Vec<ModalVector>,
}

impl HistoryFunction {
    pub fn new(s: Vec<f64>, values: Vec<ModalVector>) -> Result<Self> {
        if s.len() != values.len() {
            return Err(MgtError::GridMismatch(format!("{} grid points but {} values", s.len(), values.len())));
        }
        if s.len() < 2 {
            return Err(MgtError::Resolution("a history needs at least two grid points".into()));
        }
        if s[0] < 0.0 || s.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(MgtError::param("history grid must be nonnegative and strictly increasing"));
        }
        Ok(Self { s, values })
    }

    /// Sample `f` (returning one value per mode) on a grid.
    pub fn sample(s: Vec<f64>, f: impl Fn(f64) -> Vec<f64>) -> Result<Self> {
        let values = s.iter().map(|&x| ModalVector(f(x))).collect();
        Self::new(s, values)
    }

    pub fn zeros_like(&self) -> Self {
        let n = self.values[0].len();
        Self { s: self.s.clone(), values: vec![ModalVector::zeros(n); self.s.len()] }
    }

    pub fn n_modes(&self) -> usize {
        self.values[0].len()
    }

    pub fn s_max(&self) -> f64 {
        *self.s.last().unwrap()
    }

    /// Linear interpolation; constant outside the grid.
    pub fn at(&self, x: f64) -> ModalVector {
        let i = self.s.partition_point(|&p| p <= x);
        if i == 0 {
            return self.values[0].clone();
        }
        if i == self.s.len() {
            return self.values[i - 1].clone();
        }
        let (a, b) = (self.s[i - 1], self.s[i]);
        let f = (x - a) / (b - a);
        ModalVector(
            self.values[i - 1]
                .0
                .iter()
                .zip(&self.values[i].0)
                .map(|(p, q)| p * (1.0 - f) + q * f)
                .collect(),
        )
    }

    fn same_grid(&self, other: &HistoryFunction) -> Result<()> {
        if self.s != other.s {
            return Err(MgtError::GridMismatch("histories live on different s-grids".into()));
        }
        if self.n_modes() != other.n_modes() {
            return Err(MgtError::GridMismatch("histories have different mode counts".into()));
        }
        Ok(())
    }
}

/// A history in the domain of T = −∂ₛ, carried with its derivative.
#[derive(Debug, Clone, PartialEq)]
pub struct DomainTElement {
    pub eta: HistoryFunction,
    pub derivative: HistoryFunction,
}

impl DomainTElement {
    pub fn new(eta: HistoryFunction, derivative: HistoryFunction) -> Result<Self> {
        eta.same_grid(&derivative)?;
        Ok(Self { eta, derivative })
    }

    /// Sample η and η′ from closures.
    pub fn sample(s: Vec<f64>, eta: impl Fn(f64) -> Vec<f64>, deta: impl Fn(f64) -> Vec<f64>) -> Result<Self> {
        let e = HistoryFunction::sample(s.clone(), eta)?;
        let d = HistoryFunction::sample(s, deta)?;
        Self::new(e, d)
    }
}

/// Uniform grid 0, ds, 2ds, …, up to s_max.
pub fn uniform_grid(s_max: f64, ds: f64) -> Vec<f64> {
    let n = (s_max / ds).round() as usize;
    (0..=n).map(|k| k as f64 * ds).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GeneratorIdentity {
    pub lhs: f64,
    pub rhs: f64,
    pub gap: f64,
}

/// The weighted space for a given kernel and spectrum.
#[derive(Debug, Clone)]
pub struct MemorySpace {
    kernel: KernelRef,
    spectrum: Spectrum,
}

impl MemorySpace {
    pub fn new(kernel: KernelRef, spectrum: Spectrum) -> Self {
        Self { kernel, spectrum }
    }

    pub fn spectrum(&self) -> &Spectrum {
        &self.spectrum
    }

    /// ∫ w(s) ⟨a(s), b(s)⟩₁ ds by the trapezoidal rule, [0, s₀] by constant
    /// extension, and `tail_weight`·⟨a(S), b(S)⟩₁ for the part past the grid.
    fn weighted(
        &self,
        a: &HistoryFunction,
        b: &HistoryFunction,
        weight: impl Fn(f64) -> f64,
        tail_weight: f64,
    ) -> Result<f64> {
        a.same_grid(b)?;
        if a.n_modes() != self.spectrum.len() {
            return Err(MgtError::GridMismatch(format!(
                "history has {} modes, spectrum {}",
                a.n_modes(),
                self.spectrum.len()
            )));
        }
        let prod: Vec<f64> = a.values.iter().zip(&b.values).map(|(x, y)| x.dot(&y.0, &self.spectrum, 1.0)).collect();
        let mut bps = self.kernel.breakpoints();
        bps.sort_by(f64::total_cmp);
        let left_limit = |x: f64| weight(x - 1e-12 * x.max(1.0));
        let mut acc = 0.0;
        for k in 1..prod.len() {
            let (l, r) = (a.s[k - 1], a.s[k]);
            let inside = &bps[bps.partition_point(|&p| p <= l)..bps.partition_point(|&p| p <= r)];
            if inside.is_empty() {
                acc += 0.5 * (r - l) * (weight(l) * prod[k - 1] + weight(r) * prod[k]);
                continue;
            }
            // split at jumps of the weight, taking one-sided limits on each piece
            let lerp = |x: f64| prod[k - 1] + (prod[k] - prod[k - 1]) * (x - l) / (r - l);
            let mut cuts = vec![l];
            cuts.extend(inside.iter().copied());
            if *cuts.last().unwrap() < r {
                cuts.push(r);
            }
            for w in cuts.windows(2) {
                let wr = if inside.contains(&w[1]) { left_limit(w[1]) } else { weight(w[1]) };
                acc += 0.5 * (w[1] - w[0]) * (weight(w[0]) * lerp(w[0]) + wr * lerp(w[1]));
            }
        }
        let f0 = weight(a.s[0]) * prod[0];
        acc += a.s[0] * f0;
        let last = a.values.len() - 1;
        acc += tail_weight * a.values[last].dot(&b.values[last].0, &self.spectrum, 1.0);
        Ok(acc)
    }

    /// ⟨η₁, η₂⟩_M = ∫₀^∞ −g′(s)⟨η₁(s), η₂(s)⟩₁ ds.
    pub fn m_inner(&self, a: &HistoryFunction, b: &HistoryFunction) -> Result<f64> {
        let k = &self.kernel;
        self.weighted(a, b, |s| -k.dg(s), k.g(a.s_max()))
    }

    pub fn m_norm_sq(&self, eta: &HistoryFunction) -> Result<f64> {
        self.m_inner(eta, eta)
    }

    /// Check ⟨Tη, η⟩_M = −½∫₀^∞ g″(s)‖η(s)‖₁² ds with both sides computed by
    /// quadrature.
    pub fn generator_identity(&self, elem: &DomainTElement) -> Result<GeneratorIdentity> {
        let eta = &elem.eta;
        let scale = eta
            .values
            .iter()
            .map(|v| v.norm_sq(&self.spectrum, 1.0).sqrt())
            .fold(0.0f64, f64::max)
            .max(1.0);
        let (s0, s1) = (eta.s[0], eta.s[1]);
        let at0: Vec<f64> = eta.values[0]
            .0
            .iter()
            .zip(&eta.values[1].0)
            .map(|(a, b)| a - s0 * (b - a) / (s1 - s0))
            .collect();
        let at0_norm = ModalVector(at0).norm_sq(&self.spectrum, 1.0).sqrt();
        if at0_norm > 1e-8 * scale {
            return Err(MgtError::DomainViolation(format!(
                "eta(0) extrapolates to norm {at0_norm:.3e}, expected 0"
            )));
        }
        let minus_d = HistoryFunction {
            s: elem.derivative.s.clone(),
            values: elem.derivative.values.iter().map(|v| ModalVector(v.0.iter().map(|x| -x).collect())).collect(),
        };
        // past the grid η is constant, so η′ = 0 there
        let k = &self.kernel;
        let lhs = self.weighted(&minus_d, eta, |s| -k.dg(s), 0.0)?;
        let rhs = -0.5 * self.weighted(eta, eta, |s| k.d2g(s), -k.dg(eta.s_max()))?;
        Ok(GeneratorIdentity { lhs, rhs, gap: (lhs - rhs).abs() })
    }

    /// [R(t)η](s) = 0 for s ≤ t and η(s − t) beyond.
    pub fn right_translate(&self, eta: &HistoryFunction, t: f64) -> HistoryFunction {
        let n = eta.n_modes();
        let values = eta
            .s
            .iter()
            .map(|&s| if s <= t { ModalVector::zeros(n) } else { eta.at(s - t) })
            .collect();
        HistoryFunction { s: eta.s.clone(), values }
    }

    /// η(s) = ∫₀ˢ e^{−(1+ω)(s−y)} ξ(y) dy, trapezoidal in y.
    pub fn resolvent(&self, xi: &HistoryFunction, omega: f64) -> HistoryFunction {
        let a = 1.0 + omega;
        let n = xi.n_modes();
        let mut values = Vec::with_capacity(xi.s.len());
        let mut cur = vec![0.0; n];
        if xi.s[0] > 0.0 {
            let h = xi.s[0];
            cur = xi.values[0].0.iter().map(|x| x * -(-a * h).exp_m1() / a).collect();
        }
        values.push(ModalVector(cur.clone()));
        for k in 1..xi.s.len() {
            let h = xi.s[k] - xi.s[k - 1];
            let e = (-a * h).exp();
            for j in 0..n {
                cur[j] = e * cur[j] + 0.5 * h * (e * xi.values[k - 1].0[j] + xi.values[k].0[j]);
            }
            values.push(ModalVector(cur.clone()));
        }
        HistoryFunction { s: xi.s.clone(), values }
    }

    /// η^t(s) = ∫_{t−s}^t f for s ≤ t and η₀(s − t) + ∫₀ᵗ f beyond, with `f`
    /// sampled at 0, dt, 2dt, … and t on that grid.
    pub fn mild_solution(&self, eta0: &HistoryFunction, f: &[ModalVector], dt: f64, t: f64) -> Result<HistoryFunction> {
        let n_t = (t / dt).round() as usize;
        if n_t >= f.len() || ((t / dt) - n_t as f64).abs() > 1e-6 {
            return Err(MgtError::Range(format!("t = {t} is not on the forcing grid")));
        }
        let n = eta0.n_modes();
        // cumulative integral F(k dt)
        let mut cum = vec![vec![0.0; n]; n_t + 1];
        for k in 1..=n_t {
            for j in 0..n {
                cum[k][j] = cum[k - 1][j] + 0.5 * dt * (f[k - 1].0[j] + f[k].0[j]);
            }
        }
        let cum_at = |x: f64| -> Vec<f64> {
            let y = (x / dt).clamp(0.0, n_t as f64);
            let i = (y.floor() as usize).min(n_t.saturating_sub(1));
            if n_t == 0 {
                return cum[0].clone();
            }
            let w = y - i as f64;
            (0..n).map(|j| cum[i][j] * (1.0 - w) + cum[i + 1][j] * w).collect()
        };
        let total = &cum[n_t];
        let values = eta0
            .s
            .iter()
            .map(|&s| {
                if s <= t {
                    let back = cum_at(t - s);
                    ModalVector((0..n).map(|j| total[j] - back[j]).collect())
                } else {
                    let base = eta0.at(s - t);
                    ModalVector((0..n).map(|j| base.0[j] + total[j]).collect())
                }
            })
            .collect();
        Ok(HistoryFunction { s: eta0.s.clone(), values })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernels::make_exponential;
    use std::sync::Arc;

    fn exp_space() -> MemorySpace {
        MemorySpace::new(Arc::new(make_exponential(1.0, 1.0).unwrap()), Spectrum::new(vec![1.0]).unwrap())
    }

    #[test]
    fn norm_of_one_minus_exp() {
        let m = exp_space();
        let eta = HistoryFunction::sample(uniform_grid(40.0, 1e-3), |s| vec![1.0 - (-s).exp()]).unwrap();
        let v = m.m_norm_sq(&eta).unwrap();
        assert!((v - 1.0 / 3.0).abs() < 1e-6, "{v}");
        let z = eta.zeros_like();
        assert_eq!(m.m_inner(&eta, &z).unwrap(), 0.0);
    }

    #[test]
    fn grid_mismatch() {
        let m = exp_space();
        let a = HistoryFunction::sample(uniform_grid(1.0, 0.1), |_| vec![1.0]).unwrap();
        let b = HistoryFunction::sample(uniform_grid(1.0, 0.05), |_| vec![1.0]).unwrap();
        assert!(matches!(m.m_inner(&a, &b), Err(MgtError::GridMismatch(_))));
    }

    #[test]
    fn generator_identity_rejects_nonzero_origin() {
        let m = exp_space();
        let e = DomainTElement::sample(uniform_grid(10.0, 0.01), |_| vec![1.0], |_| vec![0.0]).unwrap();
        assert!(matches!(m.generator_identity(&e), Err(MgtError::DomainViolation(_))));
    }

    #[test]
    fn generator_identity_for_s_exp() {
        let m = exp_space();
        let e = DomainTElement::sample(
            uniform_grid(40.0, 1e-4),
            |s| vec![s * (-s).exp()],
            |s| vec![(1.0 - s) * (-s).exp()],
        )
        .unwrap();
        let c = m.generator_identity(&e).unwrap();
        assert!((c.lhs + 1.0 / 27.0).abs() < 1e-8);
        assert!(c.gap < 1e-8, "{c:?}");
    }

    #[test]
    fn mild_solution_constant_forcing() {
        let m = exp_space();
        let eta0 = HistoryFunction::sample(uniform_grid(5.0, 0.01), |_| vec![0.0]).unwrap();
        let f = vec![ModalVector(vec![2.0]); 301];
        let out = m.mild_solution(&eta0, &f, 0.01, 3.0).unwrap();
        for (s, v) in out.s.iter().zip(&out.values) {
            assert!((v.0[0] - 2.0 * s.min(3.0)).abs() < 1e-12);
        }
    }

    #[test]
    fn translation_identity_and_vanishing() {
        let m = exp_space();
        let eta = HistoryFunction::sample(uniform_grid(5.0, 0.01), |s| vec![s.sin()]).unwrap();
        assert_eq!(m.right_translate(&eta, 0.0), eta);
        let gone = m.right_translate(&eta, 5.0);
        assert!(gone.values.iter().all(|v| v.0[0] == 0.0));
    }
}
