//! Throughput of the hot kernels: sparse-dense products, the diffusion
//! series, and building option-II / option-IV operators.

use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use gadc_core::harness::transition_for;
use gadc_core::{
    diffuse_features, generate_sbm, normalize, row_normalize_features, DiffusionConfig, FeatureMatrix, Graph, NormKind,
    SbmSpec, TransitionMatrix, TransitionOption,
};

fn fixture(n: usize, d: usize) -> (Graph, FeatureMatrix) {
    let (g, ds) = generate_sbm(&SbmSpec {
        n,
        blocks: 4,
        p_in: 10.0 / n as f64,
        p_out: 1.0 / n as f64,
        d,
        feature_separation: 1.0,
        seed: 1,
    })
    .unwrap();
    (g, row_normalize_features(&ds.features))
}

fn spmm(c: &mut Criterion) {
    let mut group = c.benchmark_group("spmm");
    for n in [1_000, 10_000] {
        let (g, x) = fixture(n, 64);
        let a = normalize(&g, NormKind::Symmetric).matrix;
        group.bench_with_input(BenchmarkId::from_parameter(n), &n, |b, _| {
            b.iter(|| a.mul_dense(black_box(x.view())).unwrap())
        });
    }
    group.finish();
}

fn diffusion(c: &mut Criterion) {
    let mut group = c.benchmark_group("diffuse_plain_K16");
    group.sample_size(20);
    for n in [1_000, 10_000] {
        let (g, x) = fixture(n, 64);
        let t = TransitionMatrix::plain(&normalize(&g, NormKind::Symmetric));
        let cfg = DiffusionConfig::default();
        group.bench_with_input(BenchmarkId::from_parameter(n), &n, |b, _| {
            b.iter(|| diffuse_features(&t, black_box(&x), &cfg).unwrap())
        });
    }
    group.finish();
}

fn operators(c: &mut Criterion) {
    let mut group = c.benchmark_group("operators");
    group.sample_size(10);
    let (g, x) = fixture(2_000, 64);
    for option in [
        TransitionOption::OptionII,
        TransitionOption::OptionIII,
        TransitionOption::OptionIV,
    ] {
        let cfg = DiffusionConfig {
            option,
            epsilon: 1.0,
            ..Default::default()
        };
        group.bench_function(BenchmarkId::new("build", option.as_str()), |b| {
            b.iter(|| transition_for(&g, black_box(&x), &cfg, 50_000).unwrap())
        });
    }
    let cfg = DiffusionConfig {
        option: TransitionOption::OptionII,
        epsilon: 1.0,
        ..Default::default()
    };
    let t = transition_for(&g, &x, &cfg, 50_000).unwrap();
    group.bench_function("diffuse_option2_K16", |b| {
        b.iter(|| diffuse_features(&t, black_box(&x), &cfg).unwrap())
    });
    group.finish();
}

criterion_group!(benches, spmm, diffusion, operators);
criterion_main!(benches);
