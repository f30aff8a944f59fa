use std::f64::consts::PI;
use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use prbox_core::{
    bell_s, maximize_s, position_joint_density, quadrant_probability, simulate_counts, GaussianTwoModeState,
    MeasurementSettings, Outcome,
};

fn state() -> GaussianTwoModeState {
    GaussianTwoModeState::new(0.75, 1.25).unwrap()
}

fn quadrant(c: &mut Criterion) {
    let bg = position_joint_density(&state(), PI, 5.0 * PI / 4.0).unwrap();
    let mut group = c.benchmark_group("quadrant_probability");
    for r in [0.0, 1.0, 3.0] {
        group.bench_with_input(BenchmarkId::from_parameter(r), &r, |b, &r| {
            b.iter(|| quadrant_probability(black_box(&bg), Outcome::Plus, Outcome::Minus, r).unwrap())
        });
    }
    group.finish();
}

fn bell(c: &mut Criterion) {
    let s = state();
    let settings = MeasurementSettings::experiment(1.0).unwrap();
    c.bench_function("bell_s", |b| b.iter(|| bell_s(black_box(&s), black_box(&settings)).unwrap()));
}

fn monte_carlo(c: &mut Criterion) {
    let s = state();
    let mut group = c.benchmark_group("simulate_counts");
    group.sample_size(10);
    for n in [100_000u64, 1_000_000] {
        group.bench_with_input(BenchmarkId::from_parameter(n), &n, |b, &n| {
            b.iter(|| simulate_counts(&s, PI, 5.0 * PI / 4.0, 0.5, n, 7).unwrap())
        });
    }
    group.finish();
}

fn optimizer(c: &mut Criterion) {
    let s = state();
    let mut group = c.benchmark_group("maximize_s");
    group.sample_size(10);
    group.bench_function("grid_pi_over_8", |b| b.iter(|| maximize_s(&s, 1.0, PI / 8.0, 1e-4).unwrap()));
    group.finish();
}

criterion_group!(benches, quadrant, bell, monte_carlo, optimizer);
criterion_main!(benches);
