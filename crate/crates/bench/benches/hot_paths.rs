//! Micro-benchmarks for the training and scoring hot paths: dense matrix
//! products, network forward/backward, optimizer steps, the masked-stack
//! gradient computation, and subset scoring.

use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};
use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use tunesel_core::ingest::PreprocessorState;
use tunesel_core::linalg;
use tunesel_core::mask::{LearnerStack, StackOptions, TrainConfig};
use tunesel_core::nn::{adam_step, init_network, AdamParams, OptimizerState};
use tunesel_core::selection::evaluate_subset;

fn random_matrix(rows: usize, cols: usize, seed: u64) -> Array2<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Array2::from_shape_fn((rows, cols), |_| rng.random_range(-1.0..1.0))
}

fn bench_matmul(c: &mut Criterion) {
    let a = random_matrix(256, 64, 0);
    let b = random_matrix(64, 32, 1);
    c.bench_function("matmul_256x64x32", |bencher| {
        bencher.iter(|| linalg::matmul(black_box(a.view()), black_box(b.view())))
    });
}

fn bench_network_pass(c: &mut Criterion) {
    let net = init_network(&[11, 64, 32, 1], 0.02, 0).unwrap();
    let batch = random_matrix(256, 11, 2);
    let targets = random_matrix(256, 1, 3);
    c.bench_function("network_forward_backward_256x11", |bencher| {
        bencher.iter(|| {
            let (pred, cache) = net.forward(black_box(batch.view())).unwrap();
            let d_pred = &pred - &targets;
            net.backward(&cache, d_pred.view()).unwrap()
        })
    });
}

fn bench_adam(c: &mut Criterion) {
    let mut params = vec![0.1f64; 10_000];
    let grads = vec![1e-3f64; 10_000];
    let mut state = OptimizerState::new(&[params.len()], AdamParams::default());
    c.bench_function("adam_step_10k_params", |bencher| {
        bencher.iter(|| {
            adam_step(
                black_box(&mut state),
                &mut [&mut params[..]],
                &[&grads[..]],
            )
            .unwrap()
        })
    });
}

fn bench_stack_gradients(c: &mut Criterion) {
    let stack = LearnerStack::build(11, 1, &StackOptions::default(), TrainConfig::default())
        .unwrap();
    let x = random_matrix(256, 11, 4);
    let y = random_matrix(256, 1, 5);
    c.bench_function("stack_loss_and_gradients_256x11", |bencher| {
        bencher.iter(|| {
            stack
                .loss_and_gradients(black_box(x.view()), black_box(y.view()))
                .unwrap()
        })
    });
}

fn bench_subset_scoring(c: &mut Criterion) {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let x = Array2::from_shape_fn((1000, 6), |_| rng.random_range(0.0..1.0));
    let y = Array2::from_shape_fn((1000, 1), |(i, _)| x[[i, 0]] + x[[i, 1]] * x[[i, 2]]);
    let candidate_names: Vec<String> = (0..6).map(|j| format!("x{}", j + 1)).collect();
    let data = tunesel_core::ingest::EncodedMatrix {
        x,
        y,
        candidate_names,
        target_names: vec!["y".into()],
        preprocessor: PreprocessorState {
            columns: vec![],
            target_names: vec!["y".into()],
        },
    };
    let subset: Vec<String> = vec!["x1".into(), "x2".into(), "x3".into()];
    c.bench_function("evaluate_subset_3_of_6_n1000", |bencher| {
        bencher.iter(|| evaluate_subset(black_box(&data), black_box(&subset), 0).unwrap())
    });
}

criterion_group!(
    benches,
    bench_matmul,
    bench_network_pass,
    bench_adam,
    bench_stack_gradients,
    bench_subset_scoring
);
criterion_main!(benches);
