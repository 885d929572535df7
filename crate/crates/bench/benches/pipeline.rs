use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use evobase_bench::{corpus, datasets, documents, examples};
use evobase_core::excerpt::{extract_candidates, generalize, DEFAULT_MAX_DISTANCE};
use evobase_core::features::{build_index, ordered_pairs};
use evobase_core::svm::{train_smo, TrainConfig};

fn features(c: &mut Criterion) {
    let docs = documents(&corpus(20));
    let streams: Vec<Vec<String>> = docs
        .iter()
        .flat_map(|d| extract_candidates(d, DEFAULT_MAX_DISTANCE))
        .map(|e| e.generalized)
        .collect();
    let mut group = c.benchmark_group("features");
    group.bench_function("ordered_pairs", |b| {
        b.iter(|| streams.iter().map(|s| ordered_pairs(black_box(s)).len()).sum::<usize>())
    });
    let index = build_index(&streams);
    group.bench_function("vectorize_frozen", |b| {
        b.iter(|| {
            streams
                .iter()
                .map(|s| index.lookup(ordered_pairs(black_box(s))).nnz())
                .sum::<usize>()
        })
    });
    group.finish();
}

fn extraction(c: &mut Criterion) {
    let docs = documents(&corpus(20));
    let mut group = c.benchmark_group("extraction");
    group.bench_function("extract_candidates", |b| {
        b.iter(|| {
            docs.iter()
                .map(|d| extract_candidates(black_box(d), DEFAULT_MAX_DISTANCE).len())
                .sum::<usize>()
        })
    });
    group.bench_function("generalize", |b| {
        b.iter(|| docs.iter().map(|d| generalize(black_box(d.tokens())).len()).sum::<usize>())
    });
    group.finish();
}

fn smo(c: &mut Criterion) {
    let config = TrainConfig::default();
    let mut group = c.benchmark_group("smo");
    group.sample_size(10);
    for articles in [20, 80] {
        let ex = examples(&datasets(&corpus(articles)));
        group.bench_with_input(BenchmarkId::new("train", ex.len()), &ex, |b, ex| {
            b.iter(|| train_smo(black_box(ex), &config).expect("trainable"))
        });
    }
    group.finish();
}

criterion_group!(benches, features, extraction, smo);
criterion_main!(benches);
