use crate::error::{MgtError, Result};

use super::{exp_moments, log_add_exp, MemoryKernel};

#[derive(Debug, Clone, Copy, PartialEq)]
enum Shape {
    /// f(s) = f(a) e^{−rate (s − a)}
    Decay { rate: f64 },
    /// f(s) = ε (1 + s − a)
    Ramp,
}

#[derive(Debug, Clone, Copy)]
struct Segment {
    a: f64,
    b: f64,
    ln_fa: f64,
    shape: Shape,
}

impl Segment {
    fn ln_f(&self, s: f64) -> f64 {
        match self.shape {
            Shape::Decay { rate } => self.ln_fa - rate * (s - self.a),
            Shape::Ramp => self.ln_fa + (1.0 + s - self.a).ln(),
        }
    }

    /// ln of f′/f.
    fn df_over_f(&self, s: f64) -> f64 {
        match self.shape {
            Shape::Decay { rate } => -rate,
            Shape::Ramp => 1.0 / (1.0 + s - self.a),
        }
    }

    /// ln ∫ₓ^b f and ln ∫ₓ^b (y − x) f(y) dy.
    fn ln_moments_from(&self, x: f64) -> (f64, f64) {
        let h = self.b - x;
        if h <= 0.0 {
            return (f64::NEG_INFINITY, f64::NEG_INFINITY);
        }
        match self.shape {
            Shape::Decay { rate } => {
                let (m0, m1) = exp_moments(rate, h);
                let lf = self.ln_f(x);
                (lf + m0.ln(), lf + m1.ln())
            }
            Shape::Ramp => {
                let c = 1.0 + x - self.a;
                let m0 = c * h + 0.5 * h * h;
                let m1 = 0.5 * c * h * h + h * h * h / 3.0;
                (self.ln_fa + m0.ln(), self.ln_fa + m1.ln())
            }
        }
    }
}

/// Kernel built from a density f that ramps up on Iₙ = [n², n²+n+1] while
/// staying below e^{−s}, so that g = ∫ₛ^∞ f satisfies (α − δ)g′ − g″ ≤ 0 but not the
/// Dafermos inequality g′ + δg ≤ 0 for any δ > 0.
///
/// Between ramps f decays log-linearly, joining the right end of Iₙ to the
/// left end of Iₙ₊₁; before I₂ it decays log-linearly from f(0) = 1; after
/// the last ramp it is e^{−s}. All arithmetic is done on logarithms.
#[derive(Debug, Clone)]
pub struct StaircaseKernel {
    n_max: usize,
    segments: Vec<Segment>,
    /// ln of the first moments ∫_seg (y − a) f(y) dy, per segment
    ln_m1: Vec<f64>,
    /// ln of the mass of each segment
    ln_m0: Vec<f64>,
    /// ln Σ_{j ≥ i} mass_j
    ln_suffix: Vec<f64>,
}

/// ln εₙ with εₙ = e^{−(n²+n+1)}/(n+2).
pub(crate) fn ln_eps(n: usize) -> f64 {
    let n = n as f64;
    -(n * n + n + 1.0) - (n + 2.0).ln()
}

impl StaircaseKernel {
    pub fn new(n_max: usize) -> Result<Self> {
        if n_max < 2 {
            return Err(MgtError::param(format!("staircase kernel needs n_max >= 2, got {n_max}")));
        }
        let mut segments = Vec::new();
        let le2 = ln_eps(2);
        segments.push(Segment { a: 0.0, b: 4.0, ln_fa: 0.0, shape: Shape::Decay { rate: -le2 / 4.0 } });
        for n in 2..=n_max {
            let nf = n as f64;
            let a = nf * nf;
            let b = a + nf + 1.0;
            segments.push(Segment { a, b, ln_fa: ln_eps(n), shape: Shape::Ramp });
            if n < n_max {
                let next = (nf + 1.0) * (nf + 1.0);
                let rate = (-b - ln_eps(n + 1)) / (next - b);
                segments.push(Segment { a: b, b: next, ln_fa: -b, shape: Shape::Decay { rate } });
            } else {
                segments.push(Segment { a: b, b: f64::INFINITY, ln_fa: -b, shape: Shape::Decay { rate: 1.0 } });
            }
        }
        let (ln_m0, ln_m1): (Vec<f64>, Vec<f64>) = segments.iter().map(|s| s.ln_moments_from(s.a)).unzip();
        let mut ln_suffix = vec![f64::NEG_INFINITY; segments.len() + 1];
        for i in (0..segments.len()).rev() {
            ln_suffix[i] = log_add_exp(ln_m0[i], ln_suffix[i + 1]);
        }
        Ok(Self { n_max, segments, ln_m1, ln_m0, ln_suffix })
    }

    pub fn n_max(&self) -> usize {
        self.n_max
    }

    fn locate(&self, s: f64) -> usize {
        let s = s.max(0.0);
        self.segments.partition_point(|seg| seg.a <= s).saturating_sub(1)
    }

    /// ln f(s).
    pub fn ln_density(&self, s: f64) -> f64 {
        let s = s.max(0.0);
        self.segments[self.locate(s)].ln_f(s)
    }

    pub fn density(&self, s: f64) -> f64 {
        self.ln_density(s).exp()
    }

    /// ln ∫ₐ^b f for a ≤ b, by exact piecewise integration.
    pub fn ln_density_integral(&self, a: f64, b: f64) -> f64 {
        let g = |x: f64| {
            let i = self.locate(x);
            log_add_exp(self.segments[i].ln_moments_from(x.max(0.0)).0, self.ln_suffix[i + 1])
        };
        let (ga, gb) = (g(a), g(b));
        ga + (-(gb - ga).exp()).ln_1p()
    }

    /// ln G(s) = ln ∫ₛ^∞ (y − s) f(y) dy.
    pub fn ln_tail(&self, s: f64) -> f64 {
        let s = s.max(0.0);
        let i = self.locate(s);
        let mut acc = self.segments[i].ln_moments_from(s).1;
        for j in i + 1..self.segments.len() {
            let shift = self.segments[j].a - s;
            let term = log_add_exp(shift.ln() + self.ln_m0[j], self.ln_m1[j]);
            acc = log_add_exp(acc, term);
        }
        acc
    }
}

impl MemoryKernel for StaircaseKernel {
    fn name(&self) -> String {
        format!("staircase(n_max={})", self.n_max)
    }

    fn g(&self, s: f64) -> f64 {
        self.ln_g(s).exp()
    }

    fn dg(&self, s: f64) -> f64 {
        -self.density(s)
    }

    fn d2g(&self, s: f64) -> f64 {
        let s = s.max(0.0);
        let seg = &self.segments[self.locate(s)];
        -seg.df_over_f(s) * seg.ln_f(s).exp()
    }

    fn mass(&self) -> f64 {
        self.ln_tail(0.0).exp()
    }

    fn tail(&self, s: f64) -> f64 {
        self.ln_tail(s).exp()
    }

    fn ln_g(&self, s: f64) -> f64 {
        let s = s.max(0.0);
        let i = self.locate(s);
        log_add_exp(self.segments[i].ln_moments_from(s).0, self.ln_suffix[i + 1])
    }

    fn ln_neg_dg(&self, s: f64) -> f64 {
        self.ln_density(s)
    }

    fn log_ratios(&self, s: f64) -> (f64, f64) {
        let s = s.max(0.0);
        let seg = &self.segments[self.locate(s)];
        let r = (seg.ln_f(s) - self.ln_g(s)).exp();
        (-r, -seg.df_over_f(s) * r)
    }

    fn breakpoints(&self) -> Vec<f64> {
        self.segments.iter().skip(1).map(|s| s.a).collect()
    }

    fn audit_probes(&self) -> Vec<f64> {
        let mut v = Vec::new();
        for n in 2..=self.n_max {
            let n2 = (n * n) as f64;
            v.extend([n2, n2 + 0.5, n2 + 1.0]);
        }
        v
    }

    fn curvature_threshold(&self) -> Option<f64> {
        // on a ramp a g′ − g″ = −a f + ε, tight at the left end where f = ε
        Some(1.0)
    }

    fn exp_bound(&self) -> Option<(f64, f64)> {
        // f ≤ e^{−s} gives g ≤ e^{−s}
        Some((1.0, 1.0))
    }

    fn support_end(&self, rel: f64) -> f64 {
        let target = self.ln_g(0.0) + rel.ln();
        let mut s = 1.0;
        while self.ln_g(s) >= target {
            s += 1.0;
        }
        s
    }
}
