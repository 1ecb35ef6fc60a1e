use std::hint::black_box;
use std::path::Path;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use relayflow_core::bounds::cutset_upper_rate;
use relayflow_core::fo_solver::{fo_feasible, solve_fo, FoProblem};
use relayflow_core::par::{batches, is_parallel, map_batches, map_batches_sequential};
use relayflow_core::protocols::gls;
use relayflow_core::simkit::{run_experiment, Experiment};
use relayflow_core::three_node::solve_three_node;
use relayflow_core::{MeanGains, NetworkInstance, RandomSource};

fn net(n: usize, k: u64, snr: f64) -> NetworkInstance {
    let g = MeanGains::uniform(n).unwrap().sample(&mut RandomSource::new(1, k).rng());
    NetworkInstance::new(g, snr).unwrap()
}

fn solvers(c: &mut Criterion) {
    let mut g = c.benchmark_group("solvers");
    g.bench_function("three_node", |b| {
        b.iter(|| solve_three_node(black_box(0.7), black_box(2.1), black_box(1.4), black_box(100.0)))
    });
    for n in [4usize, 5] {
        let x = net(n, 3, 100.0);
        let p = FoProblem::new(x.clone()).unwrap();
        g.bench_with_input(BenchmarkId::new("gls", n), &x, |b, x| b.iter(|| gls(x).unwrap()));
        g.bench_with_input(BenchmarkId::new("fo", n), &p, |b, p| b.iter(|| solve_fo(p).unwrap()));
        let target = 0.9 * solve_fo(&p).unwrap().rate;
        g.bench_with_input(BenchmarkId::new("fo_feasible", n), &p, |b, p| {
            b.iter(|| fo_feasible(p, target).unwrap())
        });
        g.bench_with_input(BenchmarkId::new("cutset_bound", n), &x, |b, x| {
            b.iter(|| cutset_upper_rate(x).unwrap())
        });
    }
    g.finish();
}

/// FO rate summed over a batch of independent draws.
fn batch_work(r: std::ops::Range<u64>) -> f64 {
    r.map(|k| solve_fo(&FoProblem::new(net(4, k, 100.0)).unwrap()).unwrap().rate)
        .sum()
}

fn engine(c: &mut Criterion) {
    let mut g = c.benchmark_group(if is_parallel() { "engine/rayon-build" } else { "engine/sequential-build" });
    g.sample_size(10);
    let ranges = batches(256, 16);
    g.bench_function("map/sequential", |b| b.iter(|| map_batches_sequential(&ranges, batch_work)));
    g.bench_function("map/pooled", |b| b.iter(|| map_batches(&ranges, None, batch_work).unwrap()));

    let text = |workers: &str| {
        format!(
            "protocols = [\"fo\", \"gls\", \"direct\", \"bound\"]\nrates_bits = [1.0]\nsnr_db = {{ start = 0.0, stop = 30.0, step = 2.5 }}\n\
             trials = 200\nseed = 1\n{workers}\n[network]\ngains = \"uniform\"\nn_nodes = 4\n"
        )
    };
    for (name, workers) in [("run/one_worker", "workers = 1"), ("run/default_pool", "")] {
        let exp = Experiment::parse(&text(workers), Path::new("bench.toml")).unwrap();
        g.bench_function(name, |b| b.iter(|| run_experiment(&exp).unwrap()));
    }
    g.finish();
}

criterion_group!(benches, solvers, engine);
criterion_main!(benches);
