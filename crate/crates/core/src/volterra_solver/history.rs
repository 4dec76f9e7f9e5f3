use crate::error::{MgtError, Result};

/// Samples u(0), u(dt), u(2dt), … of one mode.
#[derive(Debug, Clone, PartialEq)]
pub struct HistoryBuffer {
    dt: f64,
    samples: Vec<f64>,
}

impl HistoryBuffer {
    pub fn new(dt: f64, u0: f64) -> Self {
        Self { dt, samples: vec![u0] }
    }

    pub fn with_capacity(dt: f64, u0: f64, capacity: usize) -> Self {
        let mut samples = Vec::with_capacity(capacity);
        samples.push(u0);
        Self { dt, samples }
    }

    pub fn push(&mut self, u: f64) {
        self.samples.push(u);
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub(crate) fn truncate(&mut self, len: usize) {
        self.samples.truncate(len);
    }

    /// Linear interpolation at time t within the stored range.
    pub fn at(&self, t: f64) -> Result<f64> {
        let end = (self.samples.len() - 1) as f64 * self.dt;
        if t < -1e-12 * self.dt || t > end + 1e-9 * self.dt {
            return Err(MgtError::Range(format!("time {t} outside stored history [0, {end}]")));
        }
        let x = (t / self.dt).clamp(0.0, (self.samples.len() - 1) as f64);
        let i = (x.floor() as usize).min(self.samples.len().saturating_sub(2));
        if self.samples.len() == 1 {
            return Ok(self.samples[0]);
        }
        let f = x - i as f64;
        Ok(self.samples[i] * (1.0 - f) + self.samples[i + 1] * f)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn interpolation() {
        let mut h = HistoryBuffer::new(0.5, 1.0);
        h.push(2.0);
        h.push(4.0);
        assert_eq!(h.at(0.25).unwrap(), 1.5);
        assert_eq!(h.at(1.0).unwrap(), 4.0);
        assert_eq!(h.at(0.75).unwrap(), 3.0);
        assert!(h.at(1.5).is_err());
        assert_eq!(h.len(), 3);
    }
}
