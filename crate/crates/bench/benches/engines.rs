//! End-to-end engine benchmarks on small corpus models.

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use obsrank_bench::model;
use obsrank_core::analysis::AnalysisOptions;
use obsrank_core::{analyze, Algorithm};

fn engine_runs(c: &mut Criterion) {
    let mut group = c.benchmark_group("engines");
    group.sample_size(20);
    let opts = AnalysisOptions::default();
    for id in ["c2m-known-input", "hiv3", "sirs-forced", "big-known-input"] {
        let m = model(id);
        group.bench_with_input(BenchmarkId::new("probobs", id), &m, |bench, m| {
            bench.iter(|| std::hint::black_box(analyze(m, Algorithm::ProbObs, &opts).unwrap()))
        });
        group.bench_with_input(BenchmarkId::new("fispo", id), &m, |bench, m| {
            bench.iter(|| std::hint::black_box(analyze(m, Algorithm::Fispo, &opts).unwrap()))
        });
    }
    group.finish();
}

criterion_group!(engines, engine_runs);
criterion_main!(engines);
