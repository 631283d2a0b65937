use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

use banditlab::exec::Execution;
use banditlab::gittins::{compute_gittins_table_with, GittinsParams, DEFAULT_STATE_BUDGET};
use banditlab::harness::{bayes_regret, BonusSpec, ExperimentConfig, PolicySpec};
use banditlab::PriorSpec;

const MODES: [(&str, Execution); 2] = [("sequential", Execution::Sequential), ("parallel", Execution::Parallel)];

fn regret(c: &mut Criterion) {
    let mut group = c.benchmark_group("bayes_regret");
    group.sample_size(10);
    let policies = [
        ("thompson", PriorSpec::uniform(3), PolicySpec::Thompson),
        (
            "elsv_ucb_depth2",
            PriorSpec::uniform(3),
            PolicySpec::Elsv {
                bonus: BonusSpec::Ucb(1.0),
                depth: 2,
            },
        ),
        (
            "elsv_constrained_ucb",
            PriorSpec::discount_default(),
            PolicySpec::ElsvConstrained {
                bonus: BonusSpec::Ucb(1.0),
                sample_count: 1000,
            },
        ),
    ];
    for (name, prior, policy) in policies {
        for (mode, execution) in MODES {
            let mut cfg = ExperimentConfig::new(prior.clone(), policy, 100, 64, 1);
            cfg.execution = execution;
            group.bench_with_input(BenchmarkId::new(name, mode), &cfg, |b, cfg| {
                b.iter(|| bayes_regret(cfg).unwrap())
            });
        }
    }
    group.finish();
}

fn gittins(c: &mut Criterion) {
    let mut group = c.benchmark_group("gittins_table");
    group.sample_size(10);
    let params = GittinsParams {
        gamma: 0.99,
        horizon: 300,
        lambda_step: 0.001,
        max_pulls: 100,
    };
    for (mode, execution) in MODES {
        group.bench_function(mode, |b| {
            b.iter(|| compute_gittins_table_with(&params, DEFAULT_STATE_BUDGET, execution).unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, regret, gittins);
criterion_main!(benches);
