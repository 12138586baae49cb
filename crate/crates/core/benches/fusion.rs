use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use std::hint::black_box;

use fuzzfuse::experiment::{run_sweep, Experiment, SweepSpec};
use fuzzfuse::integrals::fuse_dataset_with;
use fuzzfuse::synth::{generate_with, SynthConfig, DEFAULT_CONCENTRATION, DEFAULT_ERROR_CONCENTRATION};
use fuzzfuse::{ClampPolicy, Execution, FuzzyDensitySet, IntegralKind};

const MODES: [(&str, Execution); 2] = [
    ("sequential", Execution::Sequential),
    ("parallel", Execution::Parallel),
];

fn config(samples: usize) -> SynthConfig {
    SynthConfig {
        samples,
        classes: 5,
        classifiers: 3,
        accuracies: vec![0.88, 0.93, 0.93],
        correlation: 0.5,
        concentration: DEFAULT_CONCENTRATION,
        error_concentration: DEFAULT_ERROR_CONCENTRATION,
        seed: 7,
    }
}

fn bench_fuse(c: &mut Criterion) {
    let data = generate_with(&config(20_000), Execution::Parallel).unwrap();
    let densities = FuzzyDensitySet::new(&[0.88, 0.93, 0.93], ClampPolicy::default()).unwrap();
    let mut group = c.benchmark_group("fuse_dataset/20k");
    for kind in [IntegralKind::Sugeno, IntegralKind::Choquet] {
        for (name, exec) in MODES {
            group.bench_with_input(BenchmarkId::new(kind.as_str(), name), &exec, |b, &exec| {
                b.iter(|| black_box(fuse_dataset_with(&data.matrices, &densities, kind, exec).unwrap()))
            });
        }
    }
    group.finish();
}

fn bench_synth(c: &mut Criterion) {
    let cfg = config(20_000);
    let mut group = c.benchmark_group("synth/20k");
    for (name, exec) in MODES {
        group.bench_function(name, |b| b.iter(|| black_box(generate_with(&cfg, exec).unwrap())));
    }
    group.finish();
}

fn bench_sweep(c: &mut Criterion) {
    let data = generate_with(&config(2_000), Execution::Parallel).unwrap();
    let exp = Experiment::new(data.matrices, data.labels.labels).unwrap();
    let spec = SweepSpec::default();
    let mut group = c.benchmark_group("sweep/27x2k");
    group.sample_size(20);
    for (name, exec) in MODES {
        group.bench_function(name, |b| {
            b.iter(|| black_box(run_sweep(&exp, &spec, ClampPolicy::default(), exec).unwrap()))
        });
    }
    group.finish();
}

criterion_group!(benches, bench_fuse, bench_synth, bench_sweep);
criterion_main!(benches);
