use std::sync::Arc;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use mgt_core::energetics::{energy_series, EnergyOptions};
use mgt_core::kernels::{make_oscillating, KernelRef, ScaledKernel};
use mgt_core::spectral_model::{MgtParams, Spectrum, State};
use mgt_core::volterra_solver::{solve_with, SolverOptions};
use mgt_core::Execution;

fn setup() -> (MgtParams, KernelRef, Spectrum, State) {
    let p = MgtParams::new(2.0, 1.0, 1.0).unwrap();
    let k: KernelRef = Arc::new(ScaledKernel::new(Arc::new(make_oscillating()), 0.2).unwrap());
    let spec = Spectrum::dirichlet1d(8).unwrap();
    let triples: Vec<[f64; 3]> = (1..=8).map(|j| [1.0 / j as f64, -0.5 / j as f64, 0.25 / j as f64]).collect();
    (p, k, spec, State::from_triples(&triples))
}

fn modes() -> [(&'static str, Execution); 2] {
    [("sequential", Execution::Sequential), ("parallel", Execution::Parallel)]
}

fn bench_solve(c: &mut Criterion) {
    let (p, k, spec, init) = setup();
    let mut group = c.benchmark_group("solve_8_modes_T10");
    group.sample_size(10);
    for (name, exec) in modes() {
        group.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| {
                let opts = SolverOptions { execution: exec, ..Default::default() };
                solve_with(&p, k.clone(), &spec, &init, 0.1, 10.0, 2e-3, opts).unwrap()
            })
        });
    }
    group.finish();
}

fn bench_energy(c: &mut Criterion) {
    let (p, k, spec, init) = setup();
    let traj = solve_with(&p, k, &spec, &init, 0.1, 10.0, 2e-3, SolverOptions::default()).unwrap();
    let mut group = c.benchmark_group("energy_series_8_modes_T10");
    group.sample_size(10);
    for (name, exec) in modes() {
        group.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| {
                let opts = EnergyOptions { stride: 5, omega_g: Some(1.0), execution: exec };
                energy_series(&traj, opts).unwrap()
            })
        });
    }
    group.finish();
}

criterion_group!(benches, bench_solve, bench_energy);
criterion_main!(benches);
