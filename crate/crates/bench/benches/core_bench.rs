use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use spatent_bench::{gaussian_pair, sample_cm};
use spatent_core::analysis::{momentum_window_scan, run_sweep, SweepSpec};
use spatent_core::{
    eigen_oracle, evaluate_pair, invariants, separability_test, symplectic_eigenvalues, DetectorProfile,
    ThermalFieldConfig, TruncationSpec,
};

fn symplectic(c: &mut Criterion) {
    let cm = sample_cm();
    c.bench_function("closed_form_eigenvalues", |b| {
        b.iter(|| symplectic_eigenvalues(&invariants(black_box(&cm)).unwrap()).unwrap())
    });
    c.bench_function("schur_oracle", |b| b.iter(|| eigen_oracle(black_box(&cm)).unwrap()));
    c.bench_function("separability_test", |b| b.iter(|| separability_test(black_box(&cm)).unwrap()));
}

fn pair(c: &mut Criterion) {
    let cfg = ThermalFieldConfig::at_temperature(5.0).unwrap();
    let mut group = c.benchmark_group("evaluate_pair");
    for l_max in [200, 1000, 5000] {
        let setup = gaussian_pair(l_max);
        group.bench_with_input(BenchmarkId::from_parameter(l_max), &setup, |b, s| {
            b.iter(|| evaluate_pair(s, &cfg).unwrap())
        });
    }
    group.finish();
}

fn sweeps(c: &mut Criterion) {
    let cfg = ThermalFieldConfig::default();
    let spec = SweepSpec::new(
        DetectorProfile::gaussian(),
        0.1,
        (0..8).map(|i| 0.04 * i as f64).collect(),
        (0..8).map(|i| 5.0 * i as f64).collect(),
        TruncationSpec::series(400),
    );
    let mut group = c.benchmark_group("scans");
    group.sample_size(10);
    group.bench_function("sweep_8x8", |b| b.iter(|| run_sweep(&spec, &cfg).unwrap()));
    group.bench_function("window_scan_w0.125_cap64", |b| {
        b.iter(|| momentum_window_scan(0.125, &cfg, 64).unwrap())
    });
    group.finish();
}

criterion_group!(benches, symplectic, pair, sweeps);
criterion_main!(benches);
