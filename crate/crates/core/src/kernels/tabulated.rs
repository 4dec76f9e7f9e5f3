use std::path::Path;

use serde::Deserialize;

use crate::error::{MgtError, Result};

use super::{exp_moments, MemoryKernel};

/// Kernel given by samples (sᵢ, gᵢ), interpolated log-linearly.
///
/// Derivatives are one-sided on each segment. Below the first node the first
/// segment is extended; past the last node g continues with the last
/// segment's decay rate, which must be positive.
#[derive(Debug, Clone)]
pub struct TabulatedKernel {
    s: Vec<f64>,
    ln_g: Vec<f64>,
    /// decay rate on [sᵢ, sᵢ₊₁]; the final entry is the tail rate
    rate: Vec<f64>,
    /// ∫_{sᵢ}^∞ g
    suffix: Vec<f64>,
}

#[derive(Debug, Deserialize)]
struct Row {
    s: f64,
    g: f64,
}

impl TabulatedKernel {
    pub fn new(s: Vec<f64>, g: Vec<f64>) -> Result<Self> {
        if s.len() != g.len() {
            return Err(MgtError::param("tabulated kernel: s and g lengths differ"));
        }
        if s.len() < 2 {
            return Err(MgtError::param("tabulated kernel needs at least two rows"));
        }
        if s[0] < 0.0 {
            return Err(MgtError::param("tabulated kernel: s must be nonnegative"));
        }
        for w in s.windows(2) {
            if !(w[1] > w[0]) {
                return Err(MgtError::param(format!(
                    "tabulated kernel: s must be strictly increasing ({} then {})",
                    w[0], w[1]
                )));
            }
        }
        if let Some(bad) = g.iter().find(|&&x| !(x > 0.0 && x.is_finite())) {
            return Err(MgtError::param(format!("tabulated kernel: g must be positive, got {bad}")));
        }
        let ln_g: Vec<f64> = g.iter().map(|x| x.ln()).collect();
        let n = s.len();
        let mut rate: Vec<f64> = (0..n - 1).map(|i| (ln_g[i] - ln_g[i + 1]) / (s[i + 1] - s[i])).collect();
        let last = rate[n - 2];
        if !(last > 0.0) {
            return Err(MgtError::param(
                "tabulated kernel: the last two rows must decrease so the tail is summable",
            ));
        }
        rate.push(last);
        let mut suffix = vec![0.0; n];
        suffix[n - 1] = g[n - 1] / last;
        for i in (0..n - 1).rev() {
            let (m0, _) = exp_moments(rate[i], s[i + 1] - s[i]);
            suffix[i] = suffix[i + 1] + g[i] * m0;
        }
        Ok(Self { s, ln_g, rate, suffix })
    }

    /// Read a CSV file with header `s,g`.
    pub fn from_csv_path(path: &Path) -> Result<Self> {
        let mut rdr = csv::Reader::from_path(path)
            .map_err(|e| MgtError::Io(format!("{}: {e}", path.display())))?;
        let mut s = Vec::new();
        let mut g = Vec::new();
        for row in rdr.deserialize::<Row>() {
            let row = row.map_err(|e| MgtError::param(format!("{}: {e}", path.display())))?;
            s.push(row.s);
            g.push(row.g);
        }
        Self::new(s, g)
    }

    fn locate(&self, s: f64) -> usize {
        self.s.partition_point(|&x| x <= s).saturating_sub(1)
    }
}

impl MemoryKernel for TabulatedKernel {
    fn name(&self) -> String {
        format!("tabulated({} rows)", self.s.len())
    }

    fn g(&self, s: f64) -> f64 {
        self.ln_g(s).exp()
    }

    fn dg(&self, s: f64) -> f64 {
        -self.rate[self.locate(s)] * self.g(s)
    }

    fn d2g(&self, s: f64) -> f64 {
        let r = self.rate[self.locate(s)];
        r * r * self.g(s)
    }

    fn mass(&self) -> f64 {
        self.tail(0.0)
    }

    fn tail(&self, s: f64) -> f64 {
        let i = self.locate(s);
        let g_s = self.g(s);
        if s < self.s[0] {
            let (m0, _) = exp_moments(self.rate[0], self.s[0] - s);
            return g_s * m0 + self.suffix[0];
        }
        if i + 1 == self.s.len() {
            return g_s / self.rate[i];
        }
        let (m0, _) = exp_moments(self.rate[i], self.s[i + 1] - s);
        g_s * m0 + self.suffix[i + 1]
    }

    fn ln_g(&self, s: f64) -> f64 {
        let i = self.locate(s);
        self.ln_g[i] - self.rate[i] * (s - self.s[i])
    }

    fn ln_neg_dg(&self, s: f64) -> f64 {
        self.rate[self.locate(s)].ln() + self.ln_g(s)
    }

    fn log_ratios(&self, s: f64) -> (f64, f64) {
        let r = self.rate[self.locate(s)];
        (-r, r * r)
    }

    fn breakpoints(&self) -> Vec<f64> {
        self.s.iter().copied().filter(|&x| x > 0.0).collect()
    }

    fn audit_probes(&self) -> Vec<f64> {
        self.breakpoints()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    #[test]
    fn reproduces_exponential() {
        let s: Vec<f64> = (0..=40).map(|i| i as f64 * 0.5).collect();
        let g: Vec<f64> = s.iter().map(|x| 2.0 * (-1.5 * x).exp()).collect();
        let k = TabulatedKernel::new(s, g).unwrap();
        assert!((k.mass() - 2.0 / 1.5).abs() < 1e-13);
        assert!((k.g(3.3) - 2.0 * (-1.5 * 3.3f64).exp()).abs() < 1e-14);
        assert!((k.tail(25.0) - 2.0 / 1.5 * (-1.5 * 25.0f64).exp()).abs() < 1e-25);
        assert!((k.dg(1.0) + 3.0 * (-1.5f64).exp()).abs() < 1e-13);
    }

    #[test]
    fn tail_is_consistent_with_density() {
        let s = vec![0.0, 0.3, 1.0, 2.0, 5.0];
        let g = vec![3.0, 2.0, 1.5, 0.5, 0.1];
        let k = TabulatedKernel::new(s, g).unwrap();
        let bp = k.breakpoints();
        for &x in &[0.0, 0.2, 0.3, 1.7, 4.0, 8.0] {
            let q = crate::quad::composite(x, 200.0, &bp, 0.5, |y| k.g(y));
            assert!((q - k.tail(x)).abs() < 1e-12, "{x}");
        }
    }

    #[test]
    fn csv_round_trip_and_validation() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("k.csv");
        let mut f = std::fs::File::create(&p).unwrap();
        writeln!(f, "s,g\n0,1\n1,0.5\n2,0.25").unwrap();
        let k = TabulatedKernel::from_csv_path(&p).unwrap();
        assert!((k.mass() - 1.0 / 2f64.ln()).abs() < 1e-14);

        let bad = dir.path().join("bad.csv");
        std::fs::write(&bad, "s,g\n0,1\n0,0.5\n").unwrap();
        assert!(TabulatedKernel::from_csv_path(&bad).is_err());
        assert!(TabulatedKernel::new(vec![0.0, 1.0], vec![1.0, 2.0]).is_err());
    }
}
