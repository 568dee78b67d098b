use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion, Throughput};
use lpcorrupt_core::gamma::sample_ln_gamma;
use lpcorrupt_core::pipeline::{corrupt_dataset, CorruptOptions, Dataset};
use lpcorrupt_core::sets::builtin_set;
use lpcorrupt_core::{sample_noise, CorruptionSpec, ImageTensor, PNorm, Profile, RngStream};

const D: usize = 3 * 32 * 32;

fn noise(c: &mut Criterion) {
    let mut group = c.benchmark_group("sample_noise");
    group.throughput(Throughput::Elements(D as u64));
    for p in ["0", "0.5", "1", "2", "10", "inf"] {
        let p: PNorm = p.parse().unwrap();
        let eps = if p == PNorm::Zero { 0.1 } else { 1.0 };
        let spec = CorruptionSpec::new(p, eps).unwrap();
        let mut rng = RngStream::new(1, 0).rng();
        group.bench_with_input(BenchmarkId::from_parameter(p), &spec, |b, spec| {
            b.iter(|| sample_noise(D, black_box(spec), &mut rng).unwrap())
        });
    }
    group.finish();
}

fn gamma(c: &mut Criterion) {
    let mut group = c.benchmark_group("ln_gamma");
    for shape in [0.1, 0.5, 1.0, 2.0] {
        let mut rng = RngStream::new(2, 0).rng();
        group.bench_with_input(BenchmarkId::from_parameter(shape), &shape, |b, &shape| {
            b.iter(|| sample_ln_gamma(black_box(shape), &mut rng))
        });
    }
    group.finish();
}

fn dataset(c: &mut Criterion) {
    let images = (0..64)
        .map(|i| {
            let data = (0..D).map(|j| ((i * 31 + j) % 256) as f32 / 255.0).collect();
            ImageTensor::new([3, 32, 32], data).unwrap()
        })
        .collect();
    let data = Dataset::numbered(images).unwrap();
    let set = builtin_set("iCE", Profile::Cifar).unwrap();
    let mut group = c.benchmark_group("corrupt_dataset");
    group.sample_size(10);
    group.throughput(Throughput::Elements((data.len() * set.entries().len()) as u64));
    group.bench_function("iCE_64x3x32x32", |b| {
        b.iter(|| corrupt_dataset(black_box(&data), &set, CorruptOptions::default(), 3).unwrap())
    });
    group.finish();
}

criterion_group!(benches, noise, gamma, dataset);
criterion_main!(benches);
