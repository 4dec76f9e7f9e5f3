use std::sync::Arc;

use crate::error::{MgtError, Result};
use crate::exec::Execution;
use crate::kernels::{KernelRef, MemoryKernel};
use crate::quad;
use crate::spectral_model::{classify_regime, MgtParams, Spectrum, State};

use super::cutoff::{q_rho_integral, RhoCutoff};
use super::history::HistoryBuffer;
use super::trajectory::{BlowUpEvent, ModeSeries, Trajectory};

/// Phase-space norm above which a run is declared blown up.
pub const BLOWUP_NORM: f64 = 1e12;

/// Product-trapezoid weights for ∫₀^τ g(s)u(τ−s)ds with u piecewise linear
/// on the time grid and g integrated exactly (to quadrature precision).
///
/// For offset c ∈ {0, ½} and τ = (n + c)h, node n − m receives
/// `rise[m]` from the interval s ∈ [(m−1+c)h, (m+c)h] and
/// `fall[m]` from s ∈ [(m+c)h, (m+1+c)h].
#[derive(Debug, Clone)]
pub struct ConvolutionWeights {
    h: f64,
    rise0: Vec<f64>,
    fall0: Vec<f64>,
    rise_half: Vec<f64>,
    fall_half: Vec<f64>,
    /// ∫₀^{h/2} g(s)(1 − 2s/h) ds and ∫₀^{h/2} g(s)(2s/h) ds
    local_half: (f64, f64),
}

/// (∫ g(s)(s−lo)/w, ∫ g(s)(hi−s)/w) over [lo, hi], w = hi − lo.
fn hat_moments(kernel: &dyn MemoryKernel, bps: &[f64], lo: f64, hi: f64) -> (f64, f64) {
    let w = hi - lo;
    let rise = quad::composite(lo, hi, bps, w, |s| kernel.g(s) * (s - lo)) / w;
    let fall = quad::composite(lo, hi, bps, w, |s| kernel.g(s) * (hi - s)) / w;
    (rise, fall)
}

impl ConvolutionWeights {
    pub fn new(kernel: &dyn MemoryKernel, h: f64, n_steps: usize, exec: Execution) -> Self {
        let bps = kernel.breakpoints();
        let m = n_steps + 2;
        let whole = exec.map_range(m, |k| hat_moments(kernel, &bps, k as f64 * h, (k + 1) as f64 * h));
        let half = exec.map_range(m, |k| hat_moments(kernel, &bps, (k as f64 + 0.5) * h, (k as f64 + 1.5) * h));
        let mut rise0 = vec![0.0; m + 1];
        let mut fall0 = vec![0.0; m + 1];
        let mut rise_half = vec![0.0; m + 1];
        let mut fall_half = vec![0.0; m + 1];
        for k in 0..m {
            fall0[k] = whole[k].1;
            rise0[k + 1] = whole[k].0;
            fall_half[k] = half[k].1;
            rise_half[k + 1] = half[k].0;
        }
        let (r, f) = hat_moments(kernel, &bps, 0.0, 0.5 * h);
        Self { h, rise0, fall0, rise_half, fall_half, local_half: (f, r) }
    }

    pub fn dt(&self) -> f64 {
        self.h
    }

    /// ∫₀^{t_n} g(s)u(t_n − s)ds for the samples u₀..u_n.
    pub fn full_step(&self, u: &[f64]) -> f64 {
        let n = u.len() - 1;
        if n == 0 {
            return 0.0;
        }
        self.fall0[0] * u[n] + self.interior(&self.rise0, &self.fall0, u, n) + self.rise0[n] * u[0]
    }

    /// History part of the convolution at t_n + h/2 (the part with s ≥ h/2).
    pub fn half_step_history(&self, u: &[f64]) -> f64 {
        let n = u.len() - 1;
        if n == 0 {
            return 0.0;
        }
        self.fall_half[0] * u[n]
            + self.interior(&self.rise_half, &self.fall_half, u, n)
            + self.rise_half[n] * u[0]
    }

    /// Weights (on the stage value, on u_n) of the piece s ∈ [0, h/2].
    pub fn half_step_local(&self) -> (f64, f64) {
        self.local_half
    }

    /// Σ_{m=1}^{n−1} (rise[m] + fall[m]) u_{n−m}.
    fn interior(&self, rise: &[f64], fall: &[f64], u: &[f64], n: usize) -> f64 {
        let mut acc = 0.0;
        for m in 1..n {
            acc += (rise[m] + fall[m]) * u[n - m];
        }
        acc
    }
}

/// Integrates single modes with classical RK4, the convolution evaluated at
/// the stage times by the product-trapezoid rule.
#[derive(Debug, Clone)]
pub struct Stepper {
    params: MgtParams,
    weights: Option<Arc<ConvolutionWeights>>,
    /// Q_ρ at t = k h/2
    forcing: Option<Arc<Vec<f64>>>,
    h: f64,
}

impl Stepper {
    /// Precompute weights and forcing for up to `n_steps` steps of size `dt`.
    pub fn new(
        params: MgtParams,
        kernel: &dyn MemoryKernel,
        cutoff: Option<&RhoCutoff>,
        dt: f64,
        n_steps: usize,
        exec: Execution,
    ) -> Result<Self> {
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(MgtError::param(format!("dt must be positive, got {dt}")));
        }
        let weights = (!kernel.is_zero()).then(|| Arc::new(ConvolutionWeights::new(kernel, dt, n_steps, exec)));
        let forcing = match cutoff {
            Some(c) if !kernel.is_zero() => {
                let vals = exec.map_range(2 * n_steps + 3, |k| q_rho_integral(kernel, c, 0.5 * k as f64 * dt));
                Some(Arc::new(vals.into_iter().collect::<Result<Vec<f64>>>()?))
            }
            _ => None,
        };
        Ok(Self { params, weights, forcing, h: dt })
    }

    fn rhs(&self, lambda: f64, u0: f64, y: [f64; 3], conv: f64, q: f64) -> [f64; 3] {
        let p = &self.params;
        [
            y[1],
            y[2],
            -p.alpha * y[2] - p.beta * lambda * y[1] - p.gamma * lambda * y[0] + lambda * conv + lambda * q * u0,
        ]
    }

    fn q_at(&self, half_index: usize) -> f64 {
        self.forcing.as_ref().map_or(0.0, |f| f[half_index])
    }

    /// Advance one mode from t_n to t_{n+1}; `history` holds u₀..u_n and
    /// `y` = (u_n, v_n, w_n).
    pub fn step(&self, lambda: f64, history: &[f64], y: [f64; 3]) -> [f64; 3] {
        let n = history.len() - 1;
        let h = self.h;
        let u0 = history[0];
        let (c0, c_half, local, c1_rest, fall_first) = match &self.weights {
            None => (0.0, 0.0, (0.0, 0.0), 0.0, 0.0),
            Some(w) => {
                let un = history[n];
                let c0 = w.full_step(history);
                let c_half = w.half_step_history(history) + w.local_half.1 * un;
                // convolution at t_{n+1} minus its stage-value term
                let mut rest = w.rise0[n + 1] * history[0];
                for m in 1..=n {
                    rest += (w.rise0[m] + w.fall0[m]) * history[n + 1 - m];
                }
                (c0, c_half, w.local_half, rest, w.fall0[0])
            }
        };
        let add = |a: [f64; 3], b: [f64; 3], s: f64| [a[0] + s * b[0], a[1] + s * b[1], a[2] + s * b[2]];
        let k1 = self.rhs(lambda, u0, y, c0, self.q_at(2 * n));
        let y2 = add(y, k1, 0.5 * h);
        let k2 = self.rhs(lambda, u0, y2, c_half + local.0 * y2[0], self.q_at(2 * n + 1));
        let y3 = add(y, k2, 0.5 * h);
        let k3 = self.rhs(lambda, u0, y3, c_half + local.0 * y3[0], self.q_at(2 * n + 1));
        let y4 = add(y, k3, h);
        let k4 = self.rhs(lambda, u0, y4, c1_rest + fall_first * y4[0], self.q_at(2 * n + 2));
        [
            y[0] + h / 6.0 * (k1[0] + 2.0 * k2[0] + 2.0 * k3[0] + k4[0]),
            y[1] + h / 6.0 * (k1[1] + 2.0 * k2[1] + 2.0 * k3[1] + k4[1]),
            y[2] + h / 6.0 * (k1[2] + 2.0 * k2[2] + 2.0 * k3[2] + k4[2]),
        ]
    }

    /// Advance every mode of `state` by one step.
    pub fn step_state(&self, spectrum: &Spectrum, histories: &[HistoryBuffer], state: &State) -> State {
        let n = state.n_modes();
        let mut out = State::zeros(n);
        for j in 0..n {
            let y = self.step(spectrum.eigenvalues()[j], histories[j].samples(), [state.u.0[j], state.v.0[j], state.w.0[j]]);
            out.u.0[j] = y[0];
            out.v.0[j] = y[1];
            out.w.0[j] = y[2];
        }
        out
    }

    /// Integrate one mode for `n_steps`, stopping early once its own
    /// phase-space norm exceeds `stop_norm`.
    fn run_mode(&self, lambda: f64, y0: [f64; 3], n_steps: usize, stop_norm: f64) -> ModeSeries {
        let mut u = HistoryBuffer::with_capacity(self.h, y0[0], n_steps + 1);
        let mut v = Vec::with_capacity(n_steps + 1);
        let mut w = Vec::with_capacity(n_steps + 1);
        v.push(y0[1]);
        w.push(y0[2]);
        let mut y = y0;
        let stop_sq = stop_norm * stop_norm;
        for _ in 0..n_steps {
            y = self.step(lambda, u.samples(), y);
            u.push(y[0]);
            v.push(y[1]);
            w.push(y[2]);
            let norm_sq = lambda * (y[0] * y[0] + y[1] * y[1]) + y[2] * y[2];
            if !(norm_sq <= stop_sq) {
                break;
            }
        }
        ModeSeries { u, v, w }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverOptions {
    pub execution: Execution,
    pub blowup_norm: f64,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self { execution: Execution::default(), blowup_norm: BLOWUP_NORM }
    }
}

/// Solve on [0, T] with ρ > 0 (regularized) or ρ = 0 (original problem).
#[allow(clippy::too_many_arguments)]
pub fn solve(
    params: &MgtParams,
    kernel: KernelRef,
    spectrum: &Spectrum,
    initial: &State,
    rho: f64,
    t_end: f64,
    dt: f64,
) -> Result<Trajectory> {
    solve_with(params, kernel, spectrum, initial, rho, t_end, dt, SolverOptions::default())
}

#[allow(clippy::too_many_arguments)]
pub fn solve_with(
    params: &MgtParams,
    kernel: KernelRef,
    spectrum: &Spectrum,
    initial: &State,
    rho: f64,
    t_end: f64,
    dt: f64,
    opts: SolverOptions,
) -> Result<Trajectory> {
    let n_steps = steps_for(t_end, dt)?;
    if initial.n_modes() != spectrum.len() {
        return Err(MgtError::param(format!(
            "initial data has {} modes but the spectrum has {}",
            initial.n_modes(),
            spectrum.len()
        )));
    }
    if !(rho >= 0.0 && rho.is_finite()) {
        return Err(MgtError::param(format!("rho must be nonnegative, got {rho}")));
    }
    let regime = classify_regime(params, kernel.as_ref())?;
    let cutoff = if rho > 0.0 { Some(RhoCutoff::new(rho)?) } else { None };
    let stepper = Stepper::new(*params, kernel.as_ref(), cutoff.as_ref(), dt, n_steps, opts.execution)?;
    let lambdas = spectrum.eigenvalues();
    let mut modes = opts.execution.map_range(spectrum.len(), |j| {
        stepper.run_mode(lambdas[j], [initial.u.0[j], initial.v.0[j], initial.w.0[j]], n_steps, opts.blowup_norm)
    });

    let blowup = detect_blowup(&modes, lambdas, dt, opts.blowup_norm);
    let len = match &blowup {
        Some(ev) => ev.step + 1,
        None => n_steps + 1,
    };
    for m in &mut modes {
        m.truncate(len);
    }
    Ok(Trajectory {
        params: *params,
        kernel,
        spectrum: spectrum.clone(),
        rho,
        dt,
        t_end,
        initial: initial.clone(),
        regime,
        modes,
        blowup,
    })
}

pub(crate) fn steps_for(t_end: f64, dt: f64) -> Result<usize> {
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(MgtError::param(format!("dt must be positive, got {dt}")));
    }
    if !(t_end >= 0.0 && t_end.is_finite()) {
        return Err(MgtError::param(format!("T must be nonnegative, got {t_end}")));
    }
    let ratio = t_end / dt;
    let n = ratio.round();
    if (ratio - n).abs() > 1e-9 * ratio.max(1.0) {
        return Err(MgtError::param(format!("dt = {dt} does not divide T = {t_end}")));
    }
    Ok(n as usize)
}

fn mode_norm_sq(m: &ModeSeries, lambda: f64, k: usize) -> f64 {
    let (u, v, w) = (m.u.samples()[k], m.v[k], m.w[k]);
    lambda * (u * u + v * v) + w * w
}

fn detect_blowup(modes: &[ModeSeries], lambdas: &[f64], dt: f64, threshold: f64) -> Option<BlowUpEvent> {
    let longest = modes.iter().map(|m| m.v.len()).max()?;
    let shortest = modes.iter().map(|m| m.v.len()).min()?;
    let thr_sq = threshold * threshold;
    let mut hit = None;
    for k in 0..longest {
        let mut total = 0.0;
        for (m, &l) in modes.iter().zip(lambdas) {
            if k < m.v.len() {
                total += mode_norm_sq(m, l, k);
            }
        }
        if !(total <= thr_sq) || k >= shortest {
            hit = Some(k.min(shortest - 1));
            break;
        }
    }
    let step = hit?;
    let norms: Vec<f64> = modes.iter().zip(lambdas).map(|(m, &l)| mode_norm_sq(m, l, step).sqrt()).collect();
    let witness = norms
        .iter()
        .enumerate()
        .fold(0, |best, (j, &x)| if x > norms[best] { j } else { best });
    let series: Vec<f64> = (0..=step).map(|k| mode_norm_sq(&modes[witness], lambdas[witness], k).sqrt()).collect();
    let growth_rate = envelope_growth_rate(&series, dt);
    Some(BlowUpEvent {
        time: step as f64 * dt,
        step,
        norm: norms.iter().map(|x| x * x).sum::<f64>().sqrt(),
        witness_mode: witness,
        witness_lambda: lambdas[witness],
        mode_norms: norms,
        growth_rate,
    })
}

/// Least-squares slope of the log running maximum over the second half of
/// the series.
fn envelope_growth_rate(series: &[f64], dt: f64) -> f64 {
    let n = series.len();
    if n < 4 {
        return f64::NAN;
    }
    let mut env = Vec::with_capacity(n);
    let mut run = 0.0f64;
    for &x in series {
        run = run.max(x);
        env.push(run);
    }
    let start = n / 2;
    let pts: Vec<(f64, f64)> = (start..n).map(|k| (k as f64 * dt, env[k].ln())).collect();
    let m = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / m;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / m;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    sxy / sxx
}
