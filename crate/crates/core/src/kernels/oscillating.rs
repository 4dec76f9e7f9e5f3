use super::MemoryKernel;

/// g(s) = (1/37) e^{−s} [148 + 6 cos 6s + sin 6s].
///
/// Satisfies g′ − g″ ≤ 0 (the curvature bound with α − δ = 1) while g″ changes sign infinitely often.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct OscillatingKernel;

impl MemoryKernel for OscillatingKernel {
    fn name(&self) -> String {
        "oscillating".into()
    }

    fn g(&self, s: f64) -> f64 {
        let (sn, cs) = (6.0 * s).sin_cos();
        (-s).exp() * (148.0 + 6.0 * cs + sn) / 37.0
    }

    fn dg(&self, s: f64) -> f64 {
        -(-s).exp() * (4.0 + (6.0 * s).sin())
    }

    fn d2g(&self, s: f64) -> f64 {
        let (sn, cs) = (6.0 * s).sin_cos();
        (-s).exp() * (4.0 + sn - 6.0 * cs)
    }

    fn mass(&self) -> f64 {
        self.tail(0.0)
    }

    fn tail(&self, s: f64) -> f64 {
        let (sn, cs) = (6.0 * s).sin_cos();
        (-s).exp() * (148.0 + (12.0 * cs - 35.0 * sn) / 37.0) / 37.0
    }

    fn ln_g(&self, s: f64) -> f64 {
        let (sn, cs) = (6.0 * s).sin_cos();
        -s + ((148.0 + 6.0 * cs + sn) / 37.0).ln()
    }

    fn ln_neg_dg(&self, s: f64) -> f64 {
        -s + (4.0 + (6.0 * s).sin()).ln()
    }

    fn log_ratios(&self, s: f64) -> (f64, f64) {
        let (sn, cs) = (6.0 * s).sin_cos();
        let bracket = (148.0 + 6.0 * cs + sn) / 37.0;
        (-(4.0 + sn) / bracket, (4.0 + sn - 6.0 * cs) / bracket)
    }

    fn curvature_threshold(&self) -> Option<f64> {
        // a g′ − g″ = −e^{−s}[(a+1)(4 + sin 6s) − 6 cos 6s], whose bracket has
        // minimum 4(a+1) − sqrt((a+1)² + 36).
        Some((2.4f64).sqrt() - 1.0)
    }

    fn exp_bound(&self) -> Option<(f64, f64)> {
        Some(((148.0 + 37f64.sqrt()) / 37.0, 1.0))
    }

    fn support_end(&self, rel: f64) -> f64 {
        // g(s) ≤ 1.05 g(0) e^{−s}
        -rel.ln() + 0.05
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quad;

    #[test]
    fn values_at_zero() {
        let g = OscillatingKernel;
        assert!((g.g(0.0) - 154.0 / 37.0).abs() < 1e-14);
        assert_eq!(g.dg(0.0), -4.0);
    }

    #[test]
    fn mass_matches_quadrature() {
        let g = OscillatingKernel;
        let q = quad::adaptive(0.0, 50.0, 1e-13, 4.0, |s| g.g(s)).unwrap();
        // closed form 4 + 12/1369, checked offline with mpmath
        assert!((g.mass() - 4.008_765_522_279_035_5).abs() < 1e-14);
        assert!((q - g.mass()).abs() < 1e-10);
        assert!((g.tail(1.3) - 1.083_298_637_817_802_7).abs() < 1e-14);
    }

    #[test]
    fn derivatives_are_consistent() {
        let g = OscillatingKernel;
        for i in 0..200 {
            let s = 0.037 * i as f64 + 0.01;
            let h = 1e-5;
            let fd1 = (g.g(s + h) - g.g(s - h)) / (2.0 * h);
            let fd2 = (g.dg(s + h) - g.dg(s - h)) / (2.0 * h);
            assert!((fd1 - g.dg(s)).abs() < 1e-8);
            assert!((fd2 - g.d2g(s)).abs() < 1e-8);
            let tail_fd = (g.tail(s + h) - g.tail(s - h)) / (2.0 * h);
            assert!((tail_fd + g.g(s)).abs() < 1e-8);
        }
    }

    #[test]
    fn curvature_threshold_is_sharp() {
        let g = OscillatingKernel;
        let a = g.curvature_threshold().unwrap();
        let worst = |a: f64| {
            (0..20000)
                .map(|i| {
                    let s = i as f64 * 1e-3;
                    (a * g.dg(s) - g.d2g(s)) / (-s).exp()
                })
                .fold(f64::NEG_INFINITY, f64::max)
        };
        assert!(worst(a) <= 1e-12);
        assert!(worst(a - 0.01) > 0.0);
        assert!(worst(1.0) < 0.0);
    }
}
