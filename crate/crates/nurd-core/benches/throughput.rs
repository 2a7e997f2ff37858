//! Compares the rayon fan-out against the sequential fallback on the two
//! hot batch workloads: running the prediction loop over a suite of jobs,
//! and sweeping relaunch schedules over many rng seeds.

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use std::hint::black_box;

use nurd_core::batch::{map_items, map_items_seq};
use nurd_core::models::GbtHyperparams;
use nurd_core::nurd::{run_online, Mode, NurdConfig};
use nurd_core::scheduler::schedule_limited;
use nurd_core::trace::{generate_synthetic, JobTrace, SyntheticConfig};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn suite(n_jobs: u64) -> Vec<JobTrace> {
    (0..n_jobs)
        .map(|seed| {
            generate_synthetic(&SyntheticConfig {
                n_tasks: 150,
                feature_dim: 4,
                n_checkpoints: 12,
                seed,
                ..Default::default()
            })
            .unwrap()
        })
        .collect()
}

fn bench_predict_suite(c: &mut Criterion) {
    let jobs = suite(8);
    let cfg = NurdConfig::default();
    let hp = GbtHyperparams {
        n_rounds: 40,
        ..Default::default()
    };
    let run = |job: &JobTrace| {
        run_online(job, &cfg, &hp)
            .map(|o| o.predicted_stragglers.len())
            .unwrap_or(0)
    };

    let mut group = c.benchmark_group("predict_suite");
    group.sample_size(10);
    group.bench_function(BenchmarkId::new("sequential", jobs.len()), |b| {
        b.iter(|| black_box(map_items_seq(&jobs, run)))
    });
    group.bench_function(BenchmarkId::new("parallel", jobs.len()), |b| {
        b.iter(|| black_box(map_items(&jobs, 0, run)))
    });
    group.finish();
}

fn bench_schedule_sweep(c: &mut Criterion) {
    let job = suite(1).pop().unwrap();
    let cfg = NurdConfig {
        mode: Mode::Oracle,
        ..Default::default()
    };
    let prediction = run_online(&job, &cfg, &GbtHyperparams::default()).unwrap();
    let seeds: Vec<u64> = (0..256).collect();
    let run = |seed: &u64| {
        let mut rng = ChaCha8Rng::seed_from_u64(*seed);
        schedule_limited(&job, &prediction, 8, &mut rng)
            .map(|o| o.reduction)
            .unwrap_or(0.0)
    };

    let mut group = c.benchmark_group("schedule_sweep");
    group.sample_size(10);
    group.bench_function(BenchmarkId::new("sequential", seeds.len()), |b| {
        b.iter(|| black_box(map_items_seq(&seeds, run)))
    });
    group.bench_function(BenchmarkId::new("parallel", seeds.len()), |b| {
        b.iter(|| black_box(map_items(&seeds, 0, run)))
    });
    group.finish();
}

criterion_group!(benches, bench_predict_suite, bench_schedule_sweep);
criterion_main!(benches);
