//! Sequential vs rayon execution of the data-parallel hot paths.
//!
//! Without the `parallel` feature both variants run sequentially.

use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use mimic_core::loss::{self, HorizonWindow, LossSpec};
use mimic_core::models::{ModelKind, ModelSpec};
use mimic_core::series::{make_windows, Split, SplitFractions, WindowedDataset};
use mimic_core::synth::{generate, SynthSpec};
use mimic_core::trainer::{self, TrainConfig};
use mimic_core::Exec;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const MODES: [(&str, Exec); 2] = [("sequential", Exec::Sequential), ("parallel", Exec::Auto)];

fn dataset(n: usize, t: usize) -> WindowedDataset {
    let ts = generate(&SynthSpec {
        n_points: n,
        sigma: 0.3,
        seed: 1,
        ..Default::default()
    })
    .unwrap();
    make_windows(&ts, t, 1, SplitFractions::default()).unwrap()
}

fn loss_batch(c: &mut Criterion) {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let spec = LossSpec::new(1.0, 3, 5).unwrap();
    let data: Vec<[Vec<f64>; 3]> = (0..4096)
        .map(|_| {
            let mut v = |n| (0..n).map(|_| rng.random_range(-1.0..1.0)).collect::<Vec<f64>>();
            [v(5), v(5), v(16)]
        })
        .collect();
    let windows: Vec<HorizonWindow> = data
        .iter()
        .map(|[z, p, h]| HorizonWindow {
            targets: z,
            predictions: p,
            history: h,
        })
        .collect();
    let mut group = c.benchmark_group("loss_multihorizon_4096");
    for (name, exec) in MODES {
        group.bench_function(name, |b| {
            b.iter(|| loss::loss_eval_multihorizon(black_box(&windows), &spec, exec).unwrap())
        });
    }
    group.finish();
}

fn evaluation(c: &mut Criterion) {
    let ds = dataset(5000, 32);
    let mut group = c.benchmark_group("evaluate_test_split");
    for kind in [ModelKind::Mlp, ModelKind::Rnn] {
        let spec = ModelSpec::new(kind, 32, 1).with_hidden(64);
        let params = spec.init().unwrap();
        for (name, exec) in MODES {
            group.bench_with_input(BenchmarkId::new(kind.as_str(), name), &exec, |b, &exec| {
                b.iter(|| trainer::evaluate(&spec, &params, &ds, Split::Test, exec).unwrap())
            });
        }
    }
    group.finish();
}

fn training_epoch(c: &mut Criterion) {
    let ds = dataset(2000, 16);
    let spec = ModelSpec::new(ModelKind::Rnn, 16, 1).with_hidden(32);
    let mut group = c.benchmark_group("train_one_epoch_rnn");
    group.sample_size(10);
    for (name, exec) in MODES {
        let cfg = TrainConfig {
            epochs: 1,
            batch_size: 128,
            exec,
            ..Default::default()
        }
        .with_lambda(1.0);
        group.bench_function(name, |b| b.iter(|| trainer::train(&ds, &spec, &cfg).unwrap()));
    }
    group.finish();
}

fn sweep(c: &mut Criterion) {
    let ds = dataset(1000, 8);
    let spec = ModelSpec::new(ModelKind::Mlp, 8, 1).with_hidden(16);
    let lambdas = [0.0, 1.0, 10.0, 100.0];
    let mut group = c.benchmark_group("lambda_sweep_4");
    group.sample_size(10);
    for (name, exec) in MODES {
        let cfg = TrainConfig {
            epochs: 2,
            exec,
            ..Default::default()
        };
        group.bench_function(name, |b| {
            b.iter(|| trainer::lambda_sweep(&ds, &spec, &cfg, &lambdas).unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, loss_batch, evaluation, training_epoch, sweep);
criterion_main!(benches);
