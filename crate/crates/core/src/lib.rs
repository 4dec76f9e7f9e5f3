#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

//! Spectral simulation and verification tools for the Moore-Gibson-Thompson
//! equation with a type-I memory term.
//!
//! Each eigenmode of the abstract operator is an independent scalar Volterra
//! problem. The crate integrates those problems, evaluates the energy
//! functionals along the resulting trajectories, and audits memory kernels
//! against the structural hypotheses the decay theory needs.

pub mod energetics;
pub mod error;
pub mod exec;
pub mod kernel_audit;
pub mod kernels;
pub mod memory_space;
mod quad;
pub mod spectral_model;
pub mod volterra_solver;

pub use error::{MgtError, Result};
pub use exec::Execution;
pub use kernels::{KernelSpec, MemoryKernel};
pub use spectral_model::{MgtParams, ModalVector, Regime, Spectrum, State};
pub use volterra_solver::{RhoCutoff, Trajectory};
