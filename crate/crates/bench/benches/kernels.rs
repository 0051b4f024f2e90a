//! Throughput benchmarks for the hot kernels: the leapfrog step, gauge-frame
//! construction, synthetic-field flux bounds, and weighted quadrature.

use std::sync::Arc;

use criterion::{criterion_group, criterion_main, BatchSize, Criterion};
use wavemap_core::divcurl::{flux_bounds, synthesize_field};
use wavemap_core::gauge::frame_for;
use wavemap_core::grid::RadialGrid;
use wavemap_core::manifold::TargetManifold;
use wavemap_core::solver::{init_state, InitialData, StepOptions, Stepper};

fn sphere_state(dr: f64) -> wavemap_core::FieldState {
    let grid = Arc::new(RadialGrid::new(dr, 8.0).unwrap());
    let target = Arc::new(TargetManifold::unit_sphere(3).unwrap());
    init_state(&InitialData::ring(0.2, 0.4, 2.0), grid, target, 1.0).unwrap()
}

fn bench_solver_step(c: &mut Criterion) {
    let state = sphere_state(1.0 / 128.0);
    let dt = 0.5 * state.grid.dr();
    c.bench_function("solver_step_1024_nodes", |b| {
        b.iter_batched(
            || Stepper::new(state.clone(), dt, StepOptions::default()).unwrap(),
            |mut stepper| stepper.step().unwrap(),
            BatchSize::SmallInput,
        )
    });
}

fn bench_frame_build(c: &mut Criterion) {
    let state = sphere_state(1.0 / 128.0);
    c.bench_function("gauge_frame_1024_nodes", |b| {
        b.iter(|| frame_for(&state, None).unwrap())
    });
}

fn bench_flux_bounds(c: &mut Criterion) {
    let field = synthesize_field(7, 64, 4).unwrap();
    c.bench_function("flux_bounds_64x64", |b| b.iter(|| flux_bounds(&field).unwrap()));
    c.bench_function("synthesize_field_64x64", |b| {
        b.iter(|| synthesize_field(7, 64, 4).unwrap())
    });
}

fn bench_quadrature(c: &mut Criterion) {
    let grid = RadialGrid::new(1.0 / 1024.0, 8.0).unwrap();
    let f: Vec<f64> = grid.nodes().iter().map(|r| (-r).exp()).collect();
    c.bench_function("weighted_integral_8192_nodes", |b| {
        b.iter(|| grid.weighted_integral(&f, 1.0).unwrap())
    });
}

criterion_group!(
    kernels,
    bench_solver_step,
    bench_frame_build,
    bench_flux_bounds,
    bench_quadrature
);
criterion_main!(kernels);
