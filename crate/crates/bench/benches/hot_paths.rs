use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::hint::black_box;
use twopoint_bench::{entropic_fixture, euclidean_fixture};
use twopoint_core::{
    default_parameters, run_bandit, sample_unit_sphere, two_point_gradient, FnOracle,
};

fn estimator(c: &mut Criterion) {
    let mut group = c.benchmark_group("two_point_gradient");
    for d in [8, 64, 512] {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut oracle = FnOracle::new(d, |x: &[f64]| x.iter().map(|v| v.abs()).sum::<f64>());
        let w = vec![0.01; d];
        group.bench_with_input(BenchmarkId::from_parameter(d), &d, |b, &d| {
            b.iter(|| {
                let u = sample_unit_sphere(d, &mut rng).unwrap();
                black_box(two_point_gradient(&mut oracle, &w, 1e-3, &u).unwrap())
            })
        });
    }
    group.finish();
}

fn mirror(c: &mut Criterion) {
    let mut group = c.benchmark_group("mirror_step");
    for d in [8, 64, 512] {
        let theta: Vec<f64> = (0..d).map(|i| (i as f64).sin()).collect();
        let (euc, _) = euclidean_fixture(d);
        let (ent, _) = entropic_fixture(d);
        group.bench_with_input(BenchmarkId::new("euclidean", d), &theta, |b, t| {
            b.iter(|| black_box(euc.mirror_step(t).unwrap()))
        });
        group.bench_with_input(BenchmarkId::new("entropic", d), &theta, |b, t| {
            b.iter(|| black_box(ent.mirror_step(t).unwrap()))
        });
    }
    group.finish();
}

fn full_run(c: &mut Criterion) {
    let mut group = c.benchmark_group("run_bandit");
    group.sample_size(20);
    for d in [4, 32] {
        let (setup, stream) = euclidean_fixture(d);
        let params = default_parameters(&setup, stream.lipschitz_l2, d, 1000).unwrap();
        group.bench_with_input(BenchmarkId::new("euclidean_T1000", d), &d, |b, _| {
            b.iter(|| black_box(run_bandit(&mut stream.oracle(), &setup, &params, 7).unwrap()))
        });
    }
    group.finish();
}

criterion_group!(benches, estimator, mirror, full_run);
criterion_main!(benches);
