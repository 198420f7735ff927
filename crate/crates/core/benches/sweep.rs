use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

use crowdsense::harness::{iteration_cdf, run_single, sweep_alpha, Execution, ExperimentConfig, SweepVar};
use crowdsense::{generate_scenario, GlobalParams, Mode};

fn config(execution: Execution) -> ExperimentConfig {
    ExperimentConfig {
        n_tasks: 20,
        n_users: 30,
        instances_per_point: 16,
        alpha_grid: vec![0.2, 0.4, 0.8],
        cdf_users: vec![20, 40],
        execution,
        ..ExperimentConfig::default()
    }
}

fn executions(c: &mut Criterion) {
    let mut group = c.benchmark_group("execution");
    group.sample_size(10);
    for (name, execution) in [("parallel", Execution::Parallel), ("sequential", Execution::Sequential)] {
        let cfg = config(execution);
        group.bench_with_input(BenchmarkId::new("alpha2_sweep", name), &cfg, |b, cfg| {
            b.iter(|| sweep_alpha(cfg, SweepVar::Alpha2).unwrap())
        });
        group.bench_with_input(BenchmarkId::new("alpha1_sweep", name), &cfg, |b, cfg| {
            b.iter(|| sweep_alpha(cfg, SweepVar::Alpha1).unwrap())
        });
        group.bench_with_input(BenchmarkId::new("iteration_cdf", name), &cfg, |b, cfg| {
            b.iter(|| iteration_cdf(cfg).unwrap())
        });
    }
    group.finish();
}

fn mechanisms(c: &mut Criterion) {
    let cfg = ExperimentConfig::default();
    let s = generate_scenario(&GlobalParams { rng_seed: 1, ..GlobalParams::default() }, 30, 60).unwrap();
    let mut group = c.benchmark_group("mechanism");
    group.sample_size(20);
    for mode in Mode::ALL {
        group.bench_function(mode.as_str(), |b| b.iter(|| run_single(mode, &s, None, &cfg).unwrap()));
    }
    group.finish();
}

criterion_group!(benches, executions, mechanisms);
criterion_main!(benches);
