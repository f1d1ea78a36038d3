use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use tomo_core::harness::backproject;
use tomo_core::Engine;

fn engines(c: &mut Criterion) {
    let mut group = c.benchmark_group("backproject");
    group.sample_size(10);
    for n in [128usize, 256, 512] {
        let g = tomo_bench::sinogram(n);
        for (name, engine) in [("bst", Engine::Bst), ("logpolar", Engine::Logpolar), ("naive", Engine::Naive)] {
            if engine == Engine::Naive && n > 256 {
                continue;
            }
            group.bench_with_input(BenchmarkId::new(name, n), &g, |b, g| {
                b.iter(|| backproject(g, engine, n, 2.0).unwrap())
            });
        }
    }
    group.finish();
}

fn zero_padding(c: &mut Criterion) {
    let mut group = c.benchmark_group("zero_pad");
    group.sample_size(10);
    let g = tomo_bench::sinogram(256);
    for z in [1.0, 2.0, 4.0] {
        group.bench_with_input(BenchmarkId::new("bst", z), &z, |b, &z| {
            b.iter(|| backproject(&g, Engine::Bst, 256, z).unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, engines, zero_padding);
criterion_main!(benches);
