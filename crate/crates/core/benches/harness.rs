use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use gnl_bandit::harness::{run_experiment_with, EnvSpec, ExperimentConfig};
use gnl_bandit::verify::{run_suite, SuiteSizes};
use gnl_bandit::{env, Estimator, Execution, GnlModel};

fn experiment(c: &mut Criterion) {
    let model = GnlModel::nested_logit(&[(vec![0, 2], 0.05), (vec![1, 3], 0.1)]).unwrap();
    let mut config =
        ExperimentConfig::bandit("bench", model, EnvSpec::Bernoulli(env::env1()), 2_000, 16);
    config.estimator = Estimator::EmpiricalMean;
    let mut group = c.benchmark_group("env1-nl T=2000 B=16");
    group.sample_size(10);
    for exec in [Execution::Sequential, Execution::Parallel] {
        group.bench_with_input(
            BenchmarkId::from_parameter(format!("{exec:?}")),
            &exec,
            |b, &exec| b.iter(|| run_experiment_with(black_box(&config), exec).unwrap()),
        );
    }
    group.finish();
}

fn verification(c: &mut Criterion) {
    let model = GnlModel::mnl(4, 0.25).unwrap();
    let sizes = SuiteSizes {
        smoothness_pairs: 1_000,
        orthant_points: 50,
        positive_points: 50,
        divergence_points: 4,
        divergence_draws: 5_000,
    };
    let mut group = c.benchmark_group("verification suite MNL(4, 0.25)");
    group.sample_size(10);
    for exec in [Execution::Sequential, Execution::Parallel] {
        group.bench_with_input(
            BenchmarkId::from_parameter(format!("{exec:?}")),
            &exec,
            |b, &exec| b.iter(|| run_suite(black_box(&model), 1.0, 7, sizes, exec)),
        );
    }
    group.finish();
}

criterion_group!(benches, experiment, verification);
criterion_main!(benches);
