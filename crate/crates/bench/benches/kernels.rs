use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use ssr_telescopy::ancilla;
use ssr_telescopy::bounds::{maximize_h_simplex, tridiag_max_eig};
use ssr_telescopy::fock::{haar_unitary, permanent};
use ssr_telescopy::qfi::{qfi_ratio_end_to_end, QfiMethod};
use ssr_telescopy::teleport::simulate_pipeline;
use ssr_telescopy::{OptimizerConfig, SourceParams};

fn bench_permanent(c: &mut Criterion) {
    let mut group = c.benchmark_group("permanent");
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for n in [4usize, 8, 12] {
        let u = haar_unitary(n, &mut rng);
        group.bench_with_input(BenchmarkId::from_parameter(n), &u, |b, u| {
            b.iter(|| permanent(black_box(u.matrix())))
        });
    }
    group.finish();
}

fn bench_qfi(c: &mut Criterion) {
    let mut group = c.benchmark_group("qfi_sld_block");
    let p = SourceParams::new(1e-4, 0.5, 0.7).unwrap();
    for n in [2usize, 4, 6] {
        let spec = ancilla::klm(n).unwrap();
        group.bench_with_input(BenchmarkId::new("klm", n), &spec, |b, s| {
            b.iter(|| qfi_ratio_end_to_end(black_box(s), &p, QfiMethod::SldBlock).unwrap())
        });
    }
    group.finish();
}

fn bench_teleport(c: &mut Criterion) {
    let mut group = c.benchmark_group("teleport_pipeline");
    group.sample_size(20);
    let p = SourceParams::new(1e-3, 0.7, 0.3).unwrap();
    for n in [1usize, 3, 5] {
        let f = ancilla::optimal_klm(n).unwrap().diagonal().unwrap();
        group.bench_with_input(BenchmarkId::from_parameter(n), &f, |b, f| {
            b.iter(|| simulate_pipeline(black_box(f), &p).unwrap())
        });
    }
    group.finish();
}

fn bench_bounds(c: &mut Criterion) {
    let mut group = c.benchmark_group("bounds");
    group.sample_size(10);
    group.bench_function("tridiag_k400", |b| b.iter(|| tridiag_max_eig(black_box(400)).unwrap()));
    let cfg = OptimizerConfig {
        restarts: 4,
        ..OptimizerConfig::default()
    };
    group.bench_function("simplex_k10", |b| b.iter(|| maximize_h_simplex(black_box(10), &cfg).unwrap()));
    group.finish();
}

criterion_group!(benches, bench_permanent, bench_qfi, bench_teleport, bench_bounds);
criterion_main!(benches);
