//! Structural parameters, the spectrum of A and modal state vectors.

use serde::{Deserialize, Serialize};

use crate::error::{MgtError, Result};
use crate::kernels::MemoryKernel;

/// The coefficients α, β, γ of the MGT equation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MgtParams {
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
}

impl MgtParams {
    pub fn new(alpha: f64, beta: f64, gamma: f64) -> Result<Self> {
        for (name, v) in [("alpha", alpha), ("beta", beta), ("gamma", gamma)] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(MgtError::param(format!("{name} must be positive, got {v}")));
            }
        }
        Ok(Self { alpha, beta, gamma })
    }

    /// ϰ = β − γ/α.
    pub fn stability_number(&self) -> f64 {
        self.beta - self.gamma / self.alpha
    }
}

pub fn stability_number(params: &MgtParams) -> f64 {
    params.stability_number()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Regime {
    Subcritical,
    Critical,
    Supercritical,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RegimeReport {
    pub regime: Regime,
    pub stability_number: f64,
    pub kappa: f64,
    pub admissible: bool,
}

/// Sign of ϰ, treating |ϰ| below 1e−12 of the coefficient scale as zero.
pub fn regime_of(params: &MgtParams) -> Regime {
    let k = params.stability_number();
    let scale = params.beta.max(params.gamma / params.alpha);
    if k.abs() <= 1e-12 * scale {
        Regime::Critical
    } else if k > 0.0 {
        Regime::Subcritical
    } else {
        Regime::Supercritical
    }
}

/// Classify the regime and check κ < γ.
pub fn classify_regime(params: &MgtParams, kernel: &dyn MemoryKernel) -> Result<RegimeReport> {
    let kappa = kernel.mass();
    if !kernel.is_zero() && !(kappa < params.gamma) {
        return Err(MgtError::Inadmissible { kappa, gamma: params.gamma });
    }
    Ok(RegimeReport {
        regime: regime_of(params),
        stability_number: params.stability_number(),
        kappa,
        admissible: true,
    })
}

/// Eigenvalues λ₁ ≤ … ≤ λ_N of A.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Spectrum {
    eigenvalues: Vec<f64>,
}

impl Spectrum {
    pub fn new(eigenvalues: Vec<f64>) -> Result<Self> {
        if eigenvalues.is_empty() {
            return Err(MgtError::param("spectrum is empty"));
        }
        if let Some(bad) = eigenvalues.iter().find(|&&l| !(l > 0.0 && l.is_finite())) {
            return Err(MgtError::param(format!("eigenvalues must be positive, got {bad}")));
        }
        if eigenvalues.windows(2).any(|w| w[1] < w[0]) {
            return Err(MgtError::param("eigenvalues must be sorted nondecreasingly"));
        }
        Ok(Self { eigenvalues })
    }

    /// λⱼ = j²π², the Dirichlet Laplacian on (0, 1).
    pub fn dirichlet1d(n_modes: usize) -> Result<Self> {
        let pi2 = std::f64::consts::PI * std::f64::consts::PI;
        Self::new((1..=n_modes).map(|j| (j * j) as f64 * pi2).collect())
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    pub fn len(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn is_empty(&self) -> bool {
        self.eigenvalues.is_empty()
    }
}

/// Coefficients of a vector in the eigenbasis of A.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ModalVector(pub Vec<f64>);

impl ModalVector {
    pub fn zeros(n: usize) -> Self {
        Self(vec![0.0; n])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// ‖c‖²_σ = Σ λⱼ^σ cⱼ².
    pub fn norm_sq(&self, spectrum: &Spectrum, sigma: f64) -> f64 {
        self.dot(&self.0, spectrum, sigma)
    }

    /// ⟨c, d⟩_σ.
    pub fn dot(&self, other: &[f64], spectrum: &Spectrum, sigma: f64) -> f64 {
        self.0
            .iter()
            .zip(other)
            .zip(spectrum.eigenvalues())
            .map(|((a, b), l)| weight(*l, sigma) * a * b)
            .sum()
    }

    pub fn axpy(&self, a: f64, other: &ModalVector) -> ModalVector {
        ModalVector(self.0.iter().zip(&other.0).map(|(x, y)| x + a * y).collect())
    }
}

fn weight(lambda: f64, sigma: f64) -> f64 {
    if sigma == 0.0 {
        1.0
    } else if sigma == 1.0 {
        lambda
    } else {
        lambda.powf(sigma)
    }
}

/// Phase-space state (u, ∂ₜu, ∂ₜₜu).
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct State {
    pub u: ModalVector,
    pub v: ModalVector,
    pub w: ModalVector,
}

impl State {
    pub fn zeros(n: usize) -> Self {
        Self { u: ModalVector::zeros(n), v: ModalVector::zeros(n), w: ModalVector::zeros(n) }
    }

    pub fn from_triples(triples: &[[f64; 3]]) -> Self {
        Self {
            u: ModalVector(triples.iter().map(|t| t[0]).collect()),
            v: ModalVector(triples.iter().map(|t| t[1]).collect()),
            w: ModalVector(triples.iter().map(|t| t[2]).collect()),
        }
    }

    pub fn n_modes(&self) -> usize {
        self.u.len()
    }

    /// ‖u‖₁² + ‖v‖₁² + ‖w‖².
    pub fn h_norm_sq(&self, spectrum: &Spectrum) -> f64 {
        self.u.norm_sq(spectrum, 1.0) + self.v.norm_sq(spectrum, 1.0) + self.w.norm_sq(spectrum, 0.0)
    }

    /// ((γ−κ)/α)‖v+αu‖₁² + ϰ‖v‖₁² + ‖w+αv‖².
    pub fn equivalent_norm_sq(&self, params: &MgtParams, kappa: f64, spectrum: &Spectrum) -> f64 {
        let a = params.alpha;
        let vau = self.v.axpy(a, &self.u);
        let wav = self.w.axpy(a, &self.v);
        (params.gamma - kappa) / a * vau.norm_sq(spectrum, 1.0)
            + params.stability_number() * self.v.norm_sq(spectrum, 1.0)
            + wav.norm_sq(spectrum, 0.0)
    }
}

/// Residual u‴ + αu″ + βλu′ + γλu − λ∫₀ᵗ g(s)u(t−s)ds of one mode.
///
/// `history` holds u(0), u(dt), …, u(t); `derivs` = (u, u′, u″, u‴) at t.
/// The convolution uses the plain trapezoidal rule on the samples.
pub fn modal_residual(
    params: &MgtParams,
    kernel: &dyn MemoryKernel,
    lambda: f64,
    history: &[f64],
    dt: f64,
    derivs: [f64; 4],
) -> Result<f64> {
    if history.is_empty() {
        return Err(MgtError::Resolution("no history samples".into()));
    }
    let n = history.len() - 1;
    if n > 0 && n < 2 && !kernel.is_zero() {
        return Err(MgtError::Resolution(format!(
            "{} history samples are too few for the convolution quadrature",
            history.len()
        )));
    }
    if !(dt > 0.0) {
        return Err(MgtError::param(format!("dt must be positive, got {dt}")));
    }
    let conv = if kernel.is_zero() || n == 0 {
        0.0
    } else {
        let mut acc = 0.5 * (kernel.g(0.0) * history[n] + kernel.g(n as f64 * dt) * history[0]);
        for k in 1..n {
            acc += kernel.g(k as f64 * dt) * history[n - k];
        }
        acc * dt
    };
    let [u, u1, u2, u3] = derivs;
    Ok(u3 + params.alpha * u2 + params.beta * lambda * u1 + params.gamma * lambda * u - lambda * conv)
}
