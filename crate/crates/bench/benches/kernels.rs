use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use kkm::approx::{one_pass_sketch, Method, SketchConfig};
use kkm::cluster::{kmeans, KMeansConfig};
use kkm::linalg::fwht;
use kkm::{data, KernelColumns, KernelSpec, Matrix};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn bench_fwht(c: &mut Criterion) {
    let mut group = c.benchmark_group("fwht");
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    for log_n in [10u32, 12, 14] {
        let n = 1usize << log_n;
        let v: Vec<f64> = (0..n).map(|_| rng.random()).collect();
        group.bench_with_input(BenchmarkId::from_parameter(n), &v, |b, v| {
            b.iter_batched_ref(
                || v.clone(),
                |x| fwht(black_box(x)).unwrap(),
                criterion::BatchSize::SmallInput,
            )
        });
    }
    group.finish();
}

fn bench_sketch(c: &mut Criterion) {
    let mut group = c.benchmark_group("one_pass_sketch");
    group.sample_size(10);
    for n in [1000usize, 4000] {
        let ds = data::generate("rings", n, 1).unwrap();
        let source = KernelColumns::new(&ds.data, KernelSpec::default()).unwrap();
        let cfg = SketchConfig::new(Method::OnePassSrht, 2).with_oversample(10);
        group.bench_function(BenchmarkId::from_parameter(n), |b| {
            b.iter(|| one_pass_sketch(black_box(&source), &cfg).unwrap())
        });
    }
    group.finish();
}

fn bench_kmeans(c: &mut Criterion) {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let y = Matrix::from_fn(2, 4000, |_, _| rng.random::<f64>());
    let cfg = KMeansConfig::new(7);
    c.bench_function("kmeans/4000x2/k7", |b| {
        b.iter(|| kmeans(black_box(&y), &cfg).unwrap())
    });
}

criterion_group!(benches, bench_fwht, bench_sketch, bench_kmeans);
criterion_main!(benches);
