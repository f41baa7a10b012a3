use std::sync::Arc;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use meancurv::bubbles::{default_rho0, Bubble, Pole};
use meancurv::checks::barrier_margin;
use meancurv::curvature::CurvatureProfile;
use meancurv::exec::Execution;
use meancurv::solver::{mountain_pass, newton_refine, SolverConfig};
use meancurv::spectral::{make_grid, AxisymmetricFunction};

const MODES: [(&str, Execution); 2] = [("sequential", Execution::Sequential), ("parallel", Execution::Parallel)];

fn mountain_pass_bench(c: &mut Criterion) {
    let mut group = c.benchmark_group("mountain_pass");
    group.sample_size(10);
    let h = CurvatureProfile::two_bump(1.5, 0.5).unwrap();
    for m in [64usize, 128] {
        let grid = Arc::new(make_grid(4, m).unwrap());
        let psi1 = Bubble::new(0.05, Pole::South, 4).unwrap().on_grid(&grid);
        let psi2 = Bubble::new(0.05, Pole::North, 4).unwrap().on_grid(&grid);
        for (name, exec) in MODES {
            let cfg = SolverConfig { exec, ..SolverConfig::default() };
            group.bench_with_input(BenchmarkId::new(name, m), &m, |b, _| {
                b.iter(|| mountain_pass(&h, 1.9, &psi1, &psi2, &cfg).unwrap())
            });
        }
    }
    group.finish();
}

fn newton_bench(c: &mut Criterion) {
    // dominated by the Jacobian assembly
    let mut group = c.benchmark_group("newton_refine");
    group.sample_size(10);
    let h = CurvatureProfile::two_bump(1.5, 0.5).unwrap();
    for m in [128usize, 256] {
        let grid = Arc::new(make_grid(4, m).unwrap());
        let u0 = AxisymmetricFunction::from_fn(grid, |r| 1.0 + 0.05 * (2.0 * r).cos());
        for (name, exec) in MODES {
            let cfg = SolverConfig { exec, ..SolverConfig::default() };
            group.bench_with_input(BenchmarkId::new(name, m), &m, |b, _| b.iter(|| newton_refine(&u0, &h, 1.9, &cfg).unwrap()));
        }
    }
    group.finish();
}

fn barrier_bench(c: &mut Criterion) {
    let mut group = c.benchmark_group("barrier_sampling");
    group.sample_size(10);
    let h = CurvatureProfile::two_bump(1.5, 0.5).unwrap();
    let grid = make_grid(4, 128).unwrap();
    for samples in [50usize, 200] {
        for (name, exec) in MODES {
            group.bench_with_input(BenchmarkId::new(name, samples), &samples, |b, s| {
                b.iter(|| barrier_margin(&h, &grid, *s, 7, default_rho0(4), exec).unwrap())
            });
        }
    }
    group.finish();
}

criterion_group!(benches, mountain_pass_bench, newton_bench, barrier_bench);
criterion_main!(benches);
