//! Experiment configuration files.

use std::path::{Path, PathBuf};

use mgt_core::kernels::{KernelRef, KernelSpec};
use mgt_core::spectral_model::{classify_regime, MgtParams, RegimeReport, Spectrum, State};
use mgt_core::MgtError;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Check {
    /// the F_ρ dissipation inequality, at dt and dt/2
    Dissipation,
    /// exponential decay of E and the bound E ≤ M E(0)
    Decay,
    /// conservation of the critical functional
    Conservation,
    /// blow-up with the predicted growth rate
    Blowup,
    /// two-sided bounds for F_ρ, Ψ and Λ
    Sandwich,
    /// convergence as ρ → 0 over `rho_list`
    Convergence,
    /// kernel hypotheses hold
    Audit,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpectrumConfig {
    /// "dirichlet1d" gives λⱼ = j²π²
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub preset: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_modes: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eigenvalues: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
    #[serde(rename = "T")]
    pub t_end: f64,
    pub dt: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rho: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rho_list: Option<Vec<f64>>,
    /// δ for the dissipation check; defaults to the kernel's certified value
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delta: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default = "one")]
    pub energy_stride: usize,
    #[serde(default)]
    pub checks: Vec<Check>,
    pub kernel: KernelSpec,
    pub spectrum: SpectrumConfig,
    /// (u, v, w) per mode; generated from the seed when absent
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub initial_data: Option<Vec<[f64; 3]>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<PathBuf>,
}

fn one() -> usize {
    1
}

/// Everything needed to run, after validation.
#[derive(Debug, Clone)]
pub struct Experiment {
    pub config: ExperimentConfig,
    pub params: MgtParams,
    pub kernel: KernelRef,
    pub spectrum: Spectrum,
    pub initial: State,
    pub regime: RegimeReport,
    pub seed: u64,
    pub base_dir: Option<PathBuf>,
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self, CliError> {
        toml::from_str(text).map_err(|e| CliError::Validation(format!("config: {e}")))
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Validation(format!("{}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    /// The ρ used for the regularized run: `rho`, else the smallest entry of
    /// `rho_list`, else 0.
    pub fn main_rho(&self) -> f64 {
        self.rho
            .or_else(|| self.rho_list.as_ref().and_then(|l| l.iter().copied().reduce(f64::min)))
            .unwrap_or(0.0)
    }

    pub fn validate(&self, seed_override: Option<u64>, base_dir: Option<&Path>) -> Result<Experiment, CliError> {
        let v = |e: MgtError| CliError::Validation(e.to_string());
        let params = MgtParams::new(self.alpha, self.beta, self.gamma).map_err(v)?;
        if !(self.t_end >= 0.0 && self.t_end.is_finite()) {
            return Err(CliError::Validation(format!("T must be nonnegative, got {}", self.t_end)));
        }
        if !(self.dt > 0.0) {
            return Err(CliError::Validation(format!("dt must be positive, got {}", self.dt)));
        }
        let steps = self.t_end / self.dt;
        if (steps - steps.round()).abs() > 1e-9 * steps.max(1.0) {
            return Err(CliError::Validation(format!("dt = {} does not divide T = {}", self.dt, self.t_end)));
        }
        if let Some(r) = self.rho {
            if !(r >= 0.0 && r.is_finite()) {
                return Err(CliError::Validation(format!("rho must be nonnegative, got {r}")));
            }
        }
        if let Some(list) = &self.rho_list {
            if list.len() < 2 || list.iter().any(|&r| !(r > 0.0)) || list.windows(2).any(|w| !(w[1] < w[0])) {
                return Err(CliError::Validation(
                    "rho_list needs at least two positive, strictly decreasing entries".into(),
                ));
            }
        }
        if self.energy_stride == 0 {
            return Err(CliError::Validation("energy_stride must be at least 1".into()));
        }
        let kernel = self.kernel.build(base_dir).map_err(v)?;
        let regime = classify_regime(&params, kernel.as_ref()).map_err(v)?;
        let spectrum = self.spectrum().map_err(v)?;
        let seed = seed_override.or(self.seed).unwrap_or(0);
        let initial = match &self.initial_data {
            Some(data) => {
                if data.len() != spectrum.len() {
                    return Err(CliError::Validation(format!(
                        "initial_data has {} modes, spectrum {}",
                        data.len(),
                        spectrum.len()
                    )));
                }
                State::from_triples(data)
            }
            None => generic_data(spectrum.len(), seed),
        };
        Ok(Experiment {
            config: self.clone(),
            params,
            kernel,
            spectrum,
            initial,
            regime,
            seed,
            base_dir: base_dir.map(Path::to_path_buf),
        })
    }

    fn spectrum(&self) -> mgt_core::Result<Spectrum> {
        let s = &self.spectrum;
        match (&s.eigenvalues, s.preset.as_deref()) {
            (Some(_), Some(_)) => Err(MgtError::Parameter("give either spectrum.eigenvalues or spectrum.preset".into())),
            (Some(ev), None) => Spectrum::new(ev.clone()),
            (None, Some("dirichlet1d")) => Spectrum::dirichlet1d(s.n_modes.unwrap_or(8)),
            (None, Some(other)) => Err(MgtError::Parameter(format!("unknown spectrum preset {other}"))),
            (None, None) => Err(MgtError::Parameter("spectrum needs eigenvalues or a preset".into())),
        }
    }
}

/// Uniform samples on [−1, 1] scaled by 1/j for mode j.
pub fn generic_data(n_modes: usize, seed: u64) -> State {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let triples: Vec<[f64; 3]> = (1..=n_modes)
        .map(|j| {
            let c = 1.0 / j as f64;
            [c * rng.gen_range(-1.0..=1.0), c * rng.gen_range(-1.0..=1.0), c * rng.gen_range(-1.0..=1.0)]
        })
        .collect();
    State::from_triples(&triples)
}
