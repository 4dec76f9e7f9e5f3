use serde::{Deserialize, Serialize};

use crate::error::{MgtError, Result};

/// Largest relative misfit of the envelope on the fit window.
pub const FIT_RESIDUAL_TOLERANCE: f64 = 0.05;

/// E(t) ≤ M E(0) e^{−ωt}, fitted on the last three quarters of the series.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecayFit {
    pub m: f64,
    pub omega: f64,
    pub window: (f64, f64),
    /// max over the window of (envelope / fitted line − 1)⁺: how far the
    /// least-squares line falls short of dominating the envelope
    pub residual: f64,
    pub valid: bool,
}

/// Fit an exponential envelope to a positive series.
///
/// The series is replaced by its suffix maximum (the smallest nonincreasing
/// function above it), the log of which is fitted by least squares on the
/// window. M is then the smallest constant ≥ 1 for which the bound holds at
/// every sample.
pub fn fit_decay(times: &[f64], values: &[f64]) -> Result<DecayFit> {
    if times.len() != values.len() {
        return Err(MgtError::GridMismatch(format!("{} times, {} values", times.len(), values.len())));
    }
    if times.len() < 3 {
        return Err(MgtError::Fit("need at least three samples".into()));
    }
    if let Some(v) = values.iter().find(|&&v| !(v > 0.0) || !v.is_finite()) {
        return Err(MgtError::Fit(format!("series must be positive and finite, found {v}")));
    }
    let mut env = values.to_vec();
    for i in (0..env.len() - 1).rev() {
        env[i] = env[i].max(env[i + 1]);
    }
    let (t0, t1) = (times[0], *times.last().unwrap());
    let start = t0 + 0.25 * (t1 - t0);
    let win: Vec<usize> = (0..times.len()).filter(|&i| times[i] >= start).collect();
    if win.len() < 2 {
        return Err(MgtError::Fit("fit window holds fewer than two samples".into()));
    }
    let nw = win.len() as f64;
    let mx = win.iter().map(|&i| times[i]).sum::<f64>() / nw;
    let my = win.iter().map(|&i| env[i].ln()).sum::<f64>() / nw;
    let (mut sxy, mut sxx) = (0.0, 0.0);
    for &i in &win {
        let dx = times[i] - mx;
        sxy += dx * (env[i].ln() - my);
        sxx += dx * dx;
    }
    let slope = if sxx > 0.0 { sxy / sxx } else { 0.0 };
    let intercept = my - slope * mx;
    let residual = win
        .iter()
        .map(|&i| env[i] / (intercept + slope * times[i]).exp() - 1.0)
        .fold(0.0, f64::max);
    let omega = -slope;
    let e0 = values[0];
    let m = times
        .iter()
        .zip(values)
        .map(|(&t, &v)| v * (omega * (t - t0)).exp() / e0)
        .fold(1.0, f64::max);
    Ok(DecayFit { m, omega, window: (start, t1), residual, valid: residual <= FIT_RESIDUAL_TOLERANCE })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn recovers_pure_exponential() {
        let t: Vec<f64> = (0..200).map(|i| i as f64 * 0.05).collect();
        let v: Vec<f64> = t.iter().map(|t| 3.0 * (-2.0 * t).exp()).collect();
        let fit = fit_decay(&t, &v).unwrap();
        assert!((fit.omega - 2.0).abs() < 1e-10);
        assert!((fit.m - 1.0).abs() < 1e-9);
        assert!(fit.valid);
    }

    #[test]
    fn constant_series_has_zero_rate() {
        let t: Vec<f64> = (0..50).map(f64::from).collect();
        let fit = fit_decay(&t, &vec![2.0; 50]).unwrap();
        assert!(fit.omega.abs() < 1e-14);
        assert_eq!(fit.m, 1.0);
    }

    #[test]
    fn envelope_dominates_oscillating_decay() {
        let t: Vec<f64> = (0..2000).map(|i| i as f64 * 0.01).collect();
        let v: Vec<f64> = t.iter().map(|t| (-t).exp() * (1.5 + (8.0 * t).cos())).collect();
        let fit = fit_decay(&t, &v).unwrap();
        for (ti, vi) in t.iter().zip(&v) {
            assert!(*vi <= fit.m * 2.5 * (-fit.omega * ti).exp() * (1.0 + 1e-12));
        }
        assert!((fit.omega - 1.0).abs() < 0.05);
    }

    #[test]
    fn rejects_nonpositive() {
        assert!(matches!(fit_decay(&[0.0, 1.0, 2.0], &[1.0, 0.0, 1.0]), Err(MgtError::Fit(_))));
    }
}
