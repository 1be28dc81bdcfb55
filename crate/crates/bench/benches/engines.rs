use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use std::hint::black_box;

use tspec_bench::{coupled, decoupled, symmetric};
use tspec_core::abel::{projector_radius, spectral_projector, AbelWorkspace, ContourSettings};
use tspec_core::discrete::{build_grid, discrete_spectrum, solve_nonhomogeneous};
use tspec_core::shooting::{characteristic_determinant, scan_real_eigenvalues};
use tspec_core::{BrokenFunction, C64};

fn shooting(c: &mut Criterion) {
    let p = coupled();
    c.bench_function("characteristic_determinant", |b| {
        b.iter(|| characteristic_determinant(&p, black_box(C64::new(50.0, 3.0))).unwrap())
    });
    let d = decoupled();
    c.bench_function("scan_real_window_100", |b| {
        b.iter(|| scan_real_eigenvalues(&d, black_box((-100.0, -1.0)), 400).unwrap())
    });
}

fn matrix(c: &mut Criterion) {
    let mut g = c.benchmark_group("discrete_spectrum");
    g.sample_size(10);
    for n in [100usize, 200, 400] {
        let grid = build_grid(n).unwrap();
        let p = symmetric();
        g.bench_with_input(BenchmarkId::from_parameter(n), &grid, |b, grid| {
            b.iter(|| discrete_spectrum(&p, grid, 10).unwrap())
        });
    }
    g.finish();

    let grid = build_grid(1000).unwrap();
    let f = BrokenFunction::sample(
        1000,
        |x| (C64::from(x.sin()), C64::from(x.cos())),
        |x| (C64::from(x), C64::from(1.0)),
    )
    .unwrap();
    let p = symmetric();
    c.bench_function("solve_nonhomogeneous_n1000", |b| {
        b.iter(|| {
            solve_nonhomogeneous(&p, &grid, C64::new(0.0, 1e3), &f, [C64::from(0.0); 4]).unwrap()
        })
    });
}

fn projector(c: &mut Criterion) {
    let grid = build_grid(200).unwrap();
    let ws = AbelWorkspace::new(&symmetric(), &grid).unwrap();
    let lam = ws.spectrum[1];
    let r = projector_radius(&ws.spectrum, lam);
    let mut g = c.benchmark_group("spectral_projector");
    g.sample_size(10);
    g.bench_function("n200", |b| {
        b.iter(|| {
            spectral_projector(&ws.op, &ws.spectrum, lam, r, &ContourSettings::default()).unwrap()
        })
    });
    g.finish();
}

criterion_group!(benches, shooting, matrix, projector);
criterion_main!(benches);
