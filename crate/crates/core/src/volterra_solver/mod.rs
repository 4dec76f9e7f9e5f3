//! Time integration of the modal Volterra problems.
//!
//! Each mode solves
//! u‴ + αu″ + βλu′ + γλu − λ∫₀ᵗ g(s)u(t−s)ds = λ Q_ρ(t) u₀,
//! with Q_ρ ≡ 0 for the unregularized problem (ρ = 0).

mod convergence;
mod cutoff;
mod history;
mod oracle;
mod stepper;
mod trajectory;

pub use convergence::{rho_convergence_study, ConvergenceRow, ConvergenceStudy};
pub use cutoff::{q_rho_integral, RhoCutoff};
pub use history::HistoryBuffer;
pub use oracle::{companion_eigenvalues, max_growth_rate, oracle_exponential, OracleTrajectory};
pub use stepper::{solve, solve_with, ConvolutionWeights, SolverOptions, Stepper, BLOWUP_NORM};
pub use trajectory::{eta_at, BlowUpEvent, ModeSeries, Trajectory};
