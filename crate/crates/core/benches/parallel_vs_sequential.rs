use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use crus::distance_clustering::kmeans_fit;
use crus::ensembles::ClassifierSpec;
use crus::evaluation::{gen_synthetic, run_cv, BlobSpec, ExperimentSpec, SamplerSpec, SyntheticConfig};
use crus::feature_select::cfs_best_first;
use crus::par;
use std::hint::black_box;

fn data(size: usize) -> crus::Dataset {
    let mut cfg = SyntheticConfig::new(
        vec![
            BlobSpec {
                size,
                imbalance_ratio: 2.0,
            },
            BlobSpec {
                size,
                imbalance_ratio: 20.0,
            },
        ],
        42,
    );
    cfg.numeric_dims = 6;
    cfg.nominal_dims = 2;
    gen_synthetic(&cfg).unwrap().dataset
}

const MODES: [(&str, bool); 2] = [("sequential", false), ("parallel", true)];

fn cross_validation(c: &mut Criterion) {
    let d = data(500);
    let mut g = c.benchmark_group("cv_clustering_rus_rf20");
    g.sample_size(10);
    let spec = ExperimentSpec::new(SamplerSpec::clustering_rus(2, 10.0, 4.0), ClassifierSpec::random_forest(20), 1);
    for (name, parallel) in MODES {
        g.bench_function(BenchmarkId::from_parameter(name), |b| {
            par::set_parallel(parallel);
            b.iter(|| run_cv(black_box(&d), &spec).unwrap());
        });
    }
    g.finish();
}

fn random_forest(c: &mut Criterion) {
    let d = data(1000);
    let mut g = c.benchmark_group("random_forest_100");
    g.sample_size(10);
    let spec = ClassifierSpec::random_forest(100);
    for (name, parallel) in MODES {
        g.bench_function(BenchmarkId::from_parameter(name), |b| {
            par::set_parallel(parallel);
            b.iter(|| spec.fit(black_box(&d), None, 7).unwrap());
        });
    }
    g.finish();
}

fn kmeans(c: &mut Criterion) {
    let d = data(5000);
    let mut g = c.benchmark_group("kmeans_k8");
    g.sample_size(10);
    for (name, parallel) in MODES {
        g.bench_function(BenchmarkId::from_parameter(name), |b| {
            par::set_parallel(parallel);
            b.iter(|| kmeans_fit(black_box(&d), 8, 3, 100).unwrap());
        });
    }
    g.finish();
}

fn feature_selection(c: &mut Criterion) {
    let d = data(1000);
    let mut g = c.benchmark_group("cfs_best_first");
    g.sample_size(10);
    for (name, parallel) in MODES {
        g.bench_function(BenchmarkId::from_parameter(name), |b| {
            par::set_parallel(parallel);
            b.iter(|| cfs_best_first(black_box(&d), 5).unwrap());
        });
    }
    g.finish();
}

criterion_group!(benches, cross_validation, random_forest, kmeans, feature_selection);
criterion_main!(benches);
