//! Compares the rayon-backed cell executor against the sequential fallback on
//! the two workloads that dominate wall time: batches of seeded strategy runs
//! and batches of JL property checks.

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

use consensus_jl::control::{run_strategy, Strategy, StrategyKind};
use consensus_jl::dynamics::RunOptions;
use consensus_jl::experiments::{generate_config, paper_params, ConfigName};
use consensus_jl::jl::{check_weak_jl, generate, Family};
use consensus_jl::model::ModelParams;
use consensus_jl::par;
use consensus_jl::rng::{standard_normal, substream};
use nalgebra::DVector;

fn bench_strategy_cells(c: &mut Criterion) {
    let mut params = paper_params(ConfigName::Outlier);
    params.tau = 0.05;
    let initial = generate_config(ConfigName::Outlier, &params, 1).unwrap();
    let seeds: Vec<u64> = (1..=8).collect();
    let run_cell = move |seed: u64, initial: &_, params: &ModelParams| {
        run_strategy(
            initial,
            &Strategy::Simple(StrategyKind::Random),
            5.0,
            params,
            seed,
            &RunOptions::default(),
        )
        .unwrap()
        .final_margin
    };

    let mut group = c.benchmark_group("strategy_cells");
    group.sample_size(10);
    group.bench_with_input(BenchmarkId::new("sequential", seeds.len()), &seeds, |b, seeds| {
        b.iter(|| {
            par::map_sequential(seeds.clone(), |s| run_cell(s, &initial, &params))
        })
    });
    group.bench_with_input(BenchmarkId::new("parallel", seeds.len()), &seeds, |b, seeds| {
        b.iter(|| par::map_items(seeds.clone(), |s| run_cell(s, &initial, &params)))
    });
    group.finish();
}

fn bench_jl_checks(c: &mut Criterion) {
    let d = 400;
    let k = 64;
    let mut rng = substream(3, 0);
    let points: Vec<DVector<f64>> = (0..200)
        .map(|_| {
            let v = DVector::from_fn(d, |_, _| standard_normal(&mut rng));
            let n = v.norm();
            v / n
        })
        .collect();
    let seeds: Vec<u64> = (1..=16).collect();
    let check = move |seed: u64, points: &[DVector<f64>]| {
        let m = generate(Family::Bernoulli, k, d, seed).unwrap();
        check_weak_jl(&m, points, 0.3, 0.0).unwrap().weak_violations
    };

    let mut group = c.benchmark_group("jl_property_checks");
    group.sample_size(10);
    group.bench_with_input(BenchmarkId::new("sequential", seeds.len()), &seeds, |b, seeds| {
        b.iter(|| par::map_sequential(seeds.clone(), |s| check(s, &points)))
    });
    group.bench_with_input(BenchmarkId::new("parallel", seeds.len()), &seeds, |b, seeds| {
        b.iter(|| par::map_items(seeds.clone(), |s| check(s, &points)))
    });
    group.finish();
}

criterion_group!(benches, bench_strategy_cells, bench_jl_checks);
criterion_main!(benches);
