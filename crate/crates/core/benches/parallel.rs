//! Compares the rayon data-parallel sweeps against the sequential fallback
//! on the two workloads that dominate experiment runtime: Monte Carlo
//! log-product sampling and batched derivative profiles.
//!
//! Run with `cargo bench -p lrdlab-core`. Building with
//! `--no-default-features` exercises the sequential dispatch of the public
//! API itself; the explicit `*_seq` entries here make the comparison visible
//! in a single run.

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use nalgebra::DVector;

use lrdlab_core::exec;
use lrdlab_core::lrd::{lrd_profile, LrdModel};
use lrdlab_core::numerics::{random_stable_matrix, RandomStream};
use lrdlab_core::ssm::{ContinuousSsm, StepPolicy};
use lrdlab_core::stability::{mc_histogram, mc_histogram_seq, ChannelParams};

fn bench_mc_histogram(c: &mut Criterion) {
    let channel = ChannelParams::new(0.9, 0.099).unwrap();
    let stream = RandomStream::new(7, 0);
    let mut group = c.benchmark_group("mc_histogram");
    for n_samples in [256usize, 2048] {
        let horizon = 1000;
        group.bench_with_input(
            BenchmarkId::new("seq", n_samples),
            &n_samples,
            |bench, &n| {
                bench.iter(|| mc_histogram_seq(&channel, horizon, n, stream).unwrap());
            },
        );
        group.bench_with_input(
            BenchmarkId::new("auto", n_samples),
            &n_samples,
            |bench, &n| {
                bench.iter(|| mc_histogram(&channel, horizon, n, stream).unwrap());
            },
        );
    }
    group.finish();
}

fn profile_norms(seed: u64) -> Vec<f64> {
    let h = 16;
    let stable = random_stable_matrix(h, (-1.0, -0.05), RandomStream::new(seed, 0)).unwrap();
    let mut sampler = RandomStream::new(seed, 1).sampler();
    let scale = 1.0 / (h as f64).sqrt();
    let b = DVector::from_fn(h, |_, _| sampler.normal() * scale);
    let c = DVector::zeros(h);
    let model = ContinuousSsm::new(stable.matrix, b, c, StepPolicy::Fixed(1.0)).unwrap();
    let inputs = RandomStream::new(seed, 2).sampler().normals(200);
    let h0 = DVector::zeros(h);
    lrd_profile(
        &LrdModel::Ssm {
            model: &model,
            inputs: &inputs,
            h0: &h0,
        },
        50,
        100,
        false,
    )
    .unwrap()
    .norms
}

fn bench_profile_sweep(c: &mut Criterion) {
    let seeds = 64usize;
    let mut group = c.benchmark_group("profile_sweep");
    group.bench_function("seq", |bench| {
        bench.iter(|| exec::indexed_map_seq(seeds, |s| profile_norms(s as u64)));
    });
    group.bench_function("auto", |bench| {
        bench.iter(|| exec::indexed_map(seeds, |s| profile_norms(s as u64)));
    });
    group.finish();
}

criterion_group!(benches, bench_mc_histogram, bench_profile_sweep);
criterion_main!(benches);
