use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BatchSize, Criterion};
use ndarray::Array2;

use hfsg_core::aggregator::{make_datasets, AggregationConfig, DatasetConfig, ModelSource};
use hfsg_core::corpus::{pseudo_real_corpus, CorpusConfig};
use hfsg_core::features::{feature_matrix, FeatureLayout, DEFAULT_VI_POINTS, DEFAULT_WAVELET_LEVELS};
use hfsg_core::genmodel::GenerationConfig;
use hfsg_core::latent::{fit_pca, ComponentSelection};
use hfsg_core::metrics3d::{evaluate_clouds, EmbeddedCloud, DEFAULT_GRID_STEPS, DEFAULT_KNN_K};
use hfsg_core::signalio::generate_voltage_reference;

fn corpus(rows: usize) -> hfsg_core::SignatureMatrix {
    pseudo_real_corpus(&CorpusConfig {
        signatures: rows,
        ..CorpusConfig::default()
    })
    .unwrap()
}

fn bench_fit(c: &mut Criterion) {
    let x = corpus(100);
    let mut g = c.benchmark_group("fit_pca");
    g.sample_size(10);
    g.bench_function("100x30000_99pct", |b| {
        b.iter(|| fit_pca(black_box(&x), ComponentSelection::VarianceThreshold(0.99)).unwrap())
    });
    g.finish();
}

fn bench_synth(c: &mut Criterion) {
    let model = fit_pca(&corpus(100), ComponentSelection::VarianceThreshold(0.99)).unwrap();
    let cfg = DatasetConfig {
        generation: GenerationConfig {
            n_samples: 200,
            ..GenerationConfig::default()
        },
        aggregation: AggregationConfig {
            scenarios: 200,
            ..AggregationConfig::default()
        },
    };
    let mut g = c.benchmark_group("make_datasets");
    g.sample_size(10);
    g.bench_function("200_aggregates", |b| {
        b.iter(|| make_datasets(black_box(&cfg), ModelSource::Pretrained(&model)).unwrap())
    });
    g.finish();
}

fn bench_features(c: &mut Criterion) {
    let x = corpus(20);
    let v = generate_voltage_reference(60.0, x.sample_rate_hz(), x.cols(), 1.0).unwrap();
    let layout = FeatureLayout::for_signatures(&x, DEFAULT_WAVELET_LEVELS, DEFAULT_VI_POINTS);
    c.bench_function("feature_matrix_20_rows", |b| {
        b.iter(|| feature_matrix(black_box(&x), &v, &layout).unwrap())
    });
}

fn bench_metrics(c: &mut Criterion) {
    let cloud = |n: usize, salt: f64| {
        Array2::from_shape_fn((n, 3), |(i, j)| {
            let h = ((3 * i + j) as f64 * 12.9898 + salt).sin() * 43_758.545_3;
            h - h.floor()
        })
    };
    let real = EmbeddedCloud::new(cloud(500, 1.0)).unwrap();
    c.bench_function("metrics_500x500", |b| {
        b.iter_batched(
            || EmbeddedCloud::new(cloud(500, 2.0)).unwrap(),
            |synth| evaluate_clouds(&real, &synth, DEFAULT_GRID_STEPS, DEFAULT_KNN_K).unwrap(),
            BatchSize::SmallInput,
        )
    });
}

criterion_group!(benches, bench_fit, bench_synth, bench_features, bench_metrics);
criterion_main!(benches);
