use std::sync::Arc;

use mgt_core::energetics::{
    auxiliary_functionals, check_dissipation, conserved_f_critical, energy_e, energy_e_rho, energy_series,
    fit_decay, functional_f_rho, sandwich_constants, theta_exchange_check, EnergyOptions,
};
use mgt_core::kernels::{make_exponential, make_oscillating, KernelRef, MemoryKernel, ZeroKernel};
use mgt_core::spectral_model::{MgtParams, Spectrum, State};
use mgt_core::volterra_solver::{solve, Trajectory};
use mgt_core::{Execution, MgtError};

fn data() -> State {
    State::from_triples(&[[0.8, -0.3, 0.5], [0.2, 0.4, -0.6], [-0.1, 0.05, 0.3]])
}

fn exponential_run(rho: f64, t_end: f64, dt: f64) -> Trajectory {
    let p = MgtParams::new(1.0, 2.0, 1.0).unwrap();
    let k: KernelRef = Arc::new(make_exponential(0.5, 1.0).unwrap());
    solve(&p, k, &Spectrum::dirichlet1d(3).unwrap(), &data(), rho, t_end, dt).unwrap()
}

#[test]
fn limit_identity_holds_exactly_without_cutoff() {
    let traj = exponential_run(0.0, 3.0, 1e-3);
    let g = make_exponential(0.5, 1.0).unwrap();
    for t in [0.0, 1.0, 2.5] {
        let n = traj.index_of(t).unwrap();
        let u1: f64 = traj.state(n).u.norm_sq(&traj.spectrum, 1.0);
        let lhs = energy_e_rho(&traj, t).unwrap();
        let rhs = energy_e(&traj, t).unwrap() + g.g(t) * u1;
        assert!((lhs - rhs).abs() <= 1e-12 * lhs.max(1.0), "t={t}: {lhs} vs {rhs}");
    }
}

#[test]
fn dissipation_holds_for_exponential_kernel() {
    let traj = exponential_run(0.1, 10.0, 2e-3);
    let series = energy_series(&traj, EnergyOptions { stride: 5, omega_g: Some(1.0), ..Default::default() }).unwrap();
    let half = exponential_run(0.1, 10.0, 1e-3);
    let half_series =
        energy_series(&half, EnergyOptions { stride: 10, omega_g: Some(1.0), ..Default::default() }).unwrap();
    let rep = check_dissipation(&series, &traj.params, 0.5).unwrap();
    let rep_half = check_dissipation(&half_series, &half.params, 0.5).unwrap();
    let worst = rep.margins.iter().map(|m| m.1).fold(f64::NEG_INFINITY, f64::max);
    println!(
        "C(dt)={} C(dt/2)={} worst margin {worst} increase {}",
        rep.measured_constant, rep_half.measured_constant, rep.worst_increase
    );
    assert!(rep.ok && rep_half.ok);
}

#[test]
fn sandwich_constants_are_finite() {
    let traj = exponential_run(0.1, 10.0, 2e-3);
    let series = energy_series(&traj, EnergyOptions { stride: 10, omega_g: Some(1.0), ..Default::default() }).unwrap();
    let c = sandwich_constants(&series, traj.regime.kappa).unwrap();
    println!("{c:?}");
    assert!(c.f_equivalence.is_finite() && c.f_equivalence >= 1.0);
    assert!(c.psi_bound.is_finite() && c.psi_bound > 0.0);
    assert!(c.min_psi2 >= 0.0);
    assert!(c.initial_history_ok);
    let ex = theta_exchange_check(&series, 0.5).unwrap();
    assert!(ex.holds, "{ex:?}");
}

#[test]
fn energy_decays_exponentially() {
    let traj = exponential_run(0.0, 20.0, 2e-3);
    let series = energy_series(&traj, EnergyOptions { stride: 10, ..Default::default() }).unwrap();
    let e = series.field("E").unwrap();
    let fit = fit_decay(&series.times(), &e).unwrap();
    assert!(fit.omega > 0.0 && fit.m >= 1.0);
    for (p, v) in series.points.iter().zip(&e) {
        assert!(*v <= fit.m * e[0] * (-fit.omega * p.t).exp() * (1.0 + 1e-12));
    }
}

#[test]
fn oscillating_kernel_energy_fits_an_envelope() {
    let p = MgtParams::new(2.0, 1.0, 1.0).unwrap();
    let k: KernelRef = Arc::new(mgt_core::kernels::ScaledKernel::new(Arc::new(make_oscillating()), 0.2).unwrap());
    let spec = Spectrum::dirichlet1d(4).unwrap();
    let init = State::from_triples(&[[1.0, 0.5, -0.5], [0.3, -0.2, 0.4], [-0.2, 0.1, 0.1], [0.1, 0.05, -0.1]]);
    let traj = solve(&p, k, &spec, &init, 0.0, 40.0, 5e-3).unwrap();
    let series = energy_series(&traj, EnergyOptions { stride: 10, ..Default::default() }).unwrap();
    let fit = fit_decay(&series.times(), &series.field("E").unwrap()).unwrap();
    assert!(fit.valid && fit.omega > 0.0, "{fit:?}");
}

#[test]
fn sequential_and_parallel_series_agree() {
    let traj = exponential_run(0.1, 2.0, 1e-2);
    let a = energy_series(&traj, EnergyOptions { omega_g: Some(1.0), execution: Execution::Sequential, ..Default::default() })
        .unwrap();
    let b = energy_series(&traj, EnergyOptions { omega_g: Some(1.0), execution: Execution::Parallel, ..Default::default() })
        .unwrap();
    assert_eq!(a, b);
}

#[test]
fn pointwise_and_series_values_agree() {
    let traj = exponential_run(0.1, 2.0, 1e-2);
    let series = energy_series(&traj, EnergyOptions { omega_g: Some(1.0), ..Default::default() }).unwrap();
    let n = traj.index_of(1.5).unwrap();
    let p = series.points[n];
    assert_eq!(functional_f_rho(&traj, 1.5).unwrap(), p.f_rho);
    let aux = auxiliary_functionals(&traj, 1.5, Some(1.0)).unwrap();
    assert_eq!(aux.psi, p.psi().unwrap());
    assert!(matches!(auxiliary_functionals(&traj, 1.5, None), Err(MgtError::Precondition(_))));
}

#[test]
fn oscillating_kernel_dissipates() {
    let p = MgtParams::new(2.0, 1.0, 1.0).unwrap();
    let k: KernelRef = Arc::new(mgt_core::kernels::ScaledKernel::new(Arc::new(make_oscillating()), 0.2).unwrap());
    let spec = Spectrum::dirichlet1d(3).unwrap();
    let traj = solve(&p, k, &spec, &data(), 0.05, 10.0, 2e-3).unwrap();
    let series = energy_series(&traj, EnergyOptions { stride: 5, omega_g: Some(1.0), ..Default::default() }).unwrap();
    let rep = check_dissipation(&series, &p, 1.0).unwrap();
    println!("oscillating C={} inc={}", rep.measured_constant, rep.worst_increase);
    assert!(rep.ok);
}

#[test]
fn critical_functional_is_conserved() {
    let p = MgtParams::new(2.0, 1.0, 2.0).unwrap();
    let k: KernelRef = Arc::new(ZeroKernel);
    let spec = Spectrum::new(vec![1.0]).unwrap();
    let traj = solve(&p, k, &spec, &State::from_triples(&[[0.8, -0.3, 0.5]]), 0.0, 50.0, 1e-3).unwrap();
    let f0 = conserved_f_critical(&traj, 0.0).unwrap();
    let drift = (0..traj.len())
        .step_by(100)
        .map(|n| (conserved_f_critical(&traj, traj.time(n)).unwrap() - f0).abs() / f0)
        .fold(0.0, f64::max);
    println!("relative drift {drift:e}");
    assert!(drift <= 1e-6);
    let sub = exponential_run(0.0, 1.0, 1e-2);
    assert!(matches!(conserved_f_critical(&sub, 0.0), Err(MgtError::Regime(_))));
}

