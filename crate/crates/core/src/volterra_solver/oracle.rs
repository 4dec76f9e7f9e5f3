use nalgebra::{Complex, Matrix3, Matrix4, Vector4};

use crate::error::{MgtError, Result};
use crate::spectral_model::MgtParams;

use super::stepper::steps_for;

/// Output of the exponential-kernel oracle for one mode.
#[derive(Debug, Clone, PartialEq)]
pub struct OracleTrajectory {
    pub dt: f64,
    pub u: Vec<f64>,
    pub v: Vec<f64>,
    pub w: Vec<f64>,
    /// u‴
    pub x: Vec<f64>,
}

/// Companion matrix of u⁗ + (α+ν)u‴ + (βλ+αν)u″ + (γ+βν)λu′ + λ(γν−k)u = 0.
fn quartic_companion(p: &MgtParams, k: f64, nu: f64, lambda: f64) -> Matrix4<f64> {
    let c3 = p.alpha + nu;
    let c2 = p.beta * lambda + p.alpha * nu;
    let c1 = (p.gamma + p.beta * nu) * lambda;
    let c0 = lambda * (p.gamma * nu - k);
    Matrix4::new(
        0.0, 1.0, 0.0, 0.0, //
        0.0, 0.0, 1.0, 0.0, //
        0.0, 0.0, 0.0, 1.0, //
        -c0, -c1, -c2, -c3,
    )
}

/// Solve one mode with g(s) = k e^{−νs} exactly, by propagating the
/// equivalent fourth-order ODE with the matrix exponential of its companion
/// matrix. Differentiating the Volterra equation once removes the
/// convolution; u‴(0) comes from the equation at t = 0.
#[allow(clippy::too_many_arguments)]
pub fn oracle_exponential(
    params: &MgtParams,
    k: f64,
    nu: f64,
    lambda: f64,
    initial: [f64; 3],
    t_end: f64,
    dt: f64,
) -> Result<OracleTrajectory> {
    if !(k >= 0.0 && nu > 0.0) {
        return Err(MgtError::param(format!("oracle needs k >= 0 and nu > 0, got k={k}, nu={nu}")));
    }
    let n = steps_for(t_end, dt)?;
    let [u0, v0, w0] = initial;
    let x0 = -params.alpha * w0 - params.beta * lambda * v0 - params.gamma * lambda * u0;
    let prop = (quartic_companion(params, k, nu, lambda) * dt).exp();
    let mut y = Vector4::new(u0, v0, w0, x0);
    let mut out = OracleTrajectory {
        dt,
        u: Vec::with_capacity(n + 1),
        v: Vec::with_capacity(n + 1),
        w: Vec::with_capacity(n + 1),
        x: Vec::with_capacity(n + 1),
    };
    for step in 0..=n {
        if step > 0 {
            y = prop * y;
        }
        out.u.push(y[0]);
        out.v.push(y[1]);
        out.w.push(y[2]);
        out.x.push(y[3]);
    }
    Ok(out)
}

/// Characteristic exponents of one mode: the cubic u‴ + αu″ + βλu′ + γλu = 0
/// when `memory` is None, otherwise the quartic of the exponential kernel
/// (k, ν).
pub fn companion_eigenvalues(params: &MgtParams, memory: Option<(f64, f64)>, lambda: f64) -> Vec<Complex<f64>> {
    match memory {
        Some((k, nu)) => quartic_companion(params, k, nu, lambda).complex_eigenvalues().iter().copied().collect(),
        None => {
            let m = Matrix3::new(
                0.0, 1.0, 0.0, //
                0.0, 0.0, 1.0, //
                -params.gamma * lambda, -params.beta * lambda, -params.alpha,
            );
            m.complex_eigenvalues().iter().copied().collect()
        }
    }
}

/// Largest real part among the characteristic exponents.
pub fn max_growth_rate(params: &MgtParams, memory: Option<(f64, f64)>, lambda: f64) -> f64 {
    companion_eigenvalues(params, memory, lambda)
        .iter()
        .map(|z| z.re)
        .fold(f64::NEG_INFINITY, f64::max)
}
