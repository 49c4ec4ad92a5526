use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use std::hint::black_box;

use privci::crt::{priv_crt_test, CrtConfig};
use privci::dp::report_noisy_max;
use privci::gcm::{priv_gcm_test, GcmConfig};
use privci::krr::{gram_matrix, krr_fit, median_pairwise_distance, FitConfig, KernelConfig};
use privci::seed::seeded_rng;
use privci::synth::make_conditional_model;
use privci::GroundTruth;
use privci_bench::fixture;

fn kernel_ridge(c: &mut Criterion) {
    let mut group = c.benchmark_group("krr");
    for n in [250, 1000, 2000] {
        let ds = fixture(n, 0.0, 1);
        let kernel = KernelConfig::new(median_pairwise_distance(ds.z())).unwrap();
        group.bench_with_input(BenchmarkId::new("gram", n), &n, |b, _| {
            b.iter(|| gram_matrix(black_box(ds.z()), &kernel))
        });
        group.bench_with_input(BenchmarkId::new("fit", n), &n, |b, _| {
            b.iter(|| krr_fit(ds.z(), black_box(ds.x()), 10.0, &kernel).unwrap())
        });
    }
    group.finish();
}

fn tests(c: &mut Criterion) {
    let mut group = c.benchmark_group("tests");
    group.sample_size(20);
    let ds = fixture(1000, 0.5, 2);
    let gcfg = GcmConfig::new(FitConfig::fixed(10.0));
    group.bench_function("priv_gcm/1000", |b| {
        let mut rng = seeded_rng(0);
        b.iter(|| priv_gcm_test(&ds, 7.0, &gcfg, &mut rng).unwrap())
    });
    let gt = GroundTruth::new(2.0, 0.5, ds.bound_x(), ds.bound_y(), ds.bound_x());
    let cond = make_conditional_model(&gt);
    let ccfg = CrtConfig::new(FitConfig::fixed(10.0));
    group.bench_function("priv_crt/1000/m19", |b| {
        let mut rng = seeded_rng(0);
        b.iter(|| priv_crt_test(&ds, &cond, 19, 2.0, &ccfg, &mut rng).unwrap())
    });
    group.finish();
}

fn mechanisms(c: &mut Criterion) {
    let scores: Vec<f64> = (0..500).map(|i| -(i as f64) * 0.01).collect();
    c.bench_function("report_noisy_max/500", |b| {
        let mut rng = seeded_rng(0);
        b.iter(|| report_noisy_max(black_box(&scores), 2.0, &mut rng).unwrap())
    });
}

criterion_group!(benches, kernel_ridge, tests, mechanisms);
criterion_main!(benches);
