use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

use mobelcov_core::baseline::fixed_policy_sweep;
use mobelcov_core::env::{rollout, Env, EnvConfig};
use mobelcov_core::epi::{Mode, ParamFile};
use mobelcov_core::exec::map_indexed;
use mobelcov_core::rng::SeedStream;
use mobelcov_core::{Action, Execution};

fn env(mode: Mode) -> Env {
    let model = ParamFile::shipped_default().build().unwrap();
    Env::new(model, EnvConfig { mode, ..EnvConfig::shipped_default() }).unwrap()
}

fn executions() -> [(&'static str, Execution); 2] {
    [("parallel", Execution::Parallel), ("sequential", Execution::Sequential)]
}

fn baseline_sweep(c: &mut Criterion) {
    let env = env(Mode::Deterministic);
    let mut group = c.benchmark_group("baseline_sweep_20_levels");
    group.sample_size(10);
    for (name, exec) in executions() {
        group.bench_with_input(BenchmarkId::from_parameter(name), &exec, |b, &exec| {
            b.iter(|| black_box(fixed_policy_sweep(&env, 20, 1, exec, 0).unwrap()))
        });
    }
    group.finish();
}

fn binomial_episodes(c: &mut Criterion) {
    let env = env(Mode::Stochastic);
    let seeds = SeedStream::new(0);
    let mut group = c.benchmark_group("binomial_episodes_16");
    group.sample_size(10);
    for (name, exec) in executions() {
        group.bench_with_input(BenchmarkId::from_parameter(name), &exec, |b, &exec| {
            b.iter(|| {
                black_box(map_indexed(exec, 16, |i| {
                    let mut rng = seeds.rng("bench", i as u64);
                    rollout(&env, |_, _| Ok(Action::uniform(0.5)), false, &mut rng).unwrap().raw_return()
                }))
            })
        });
    }
    group.finish();
}

criterion_group!(benches, baseline_sweep, binomial_episodes);
criterion_main!(benches);
