use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use nalgebra::{DMatrix, DVector};
use std::hint::black_box;

use nonmarkov_opinf::opinf::{infer_batch, infer_stagewise};
use nonmarkov_opinf::polysys::{simulate_full, unique_kron_power};
use nonmarkov_opinf::romsim::simulate_reduced;
use nonmarkov_opinf::ReducedModel;
use nonmarkov_opinf_bench::{chafee, linear_fixture};

fn kron_power(c: &mut Criterion) {
    let mut group = c.benchmark_group("unique_kron_power");
    for n in [10usize, 20, 40] {
        let x = DVector::from_fn(n, |i, _| (i as f64 * 0.37).cos());
        group.bench_with_input(BenchmarkId::from_parameter(n), &x, |b, x| b.iter(|| unique_kron_power(black_box(x), 3)));
    }
    group.finish();
}

fn full_model(c: &mut Criterion) {
    let sys = chafee(128).unwrap();
    let x0 = DVector::zeros(128);
    let inputs = DMatrix::from_element(1, 1000, 0.5);
    c.bench_function("chafee_128_1000_steps", |b| b.iter(|| simulate_full(&sys, &x0, black_box(&inputs), 1000).unwrap()));
}

fn memory_inference(c: &mut Criterion) {
    let fx = linear_fixture(30, 4, 20, 22).unwrap();
    let mut group = c.benchmark_group("memory_inference");
    group.sample_size(20);
    group.bench_function("stagewise_L20", |b| b.iter(|| infer_stagewise(&fx.data, &fx.markov, 20, 0.0).unwrap()));
    group.bench_function("batch_L20", |b| b.iter(|| infer_batch(&fx.data, &fx.markov, 20, 0.0).unwrap()));
    group.finish();
}

fn reduced_simulation(c: &mut Criterion) {
    let fx = linear_fixture(30, 4, 20, 22).unwrap();
    let (memory, _) = infer_stagewise(&fx.data, &fx.markov, 20, 0.0).unwrap();
    let model = ReducedModel::new(fx.markov.clone(), memory).unwrap();
    let z0 = DVector::from_element(4, 0.1);
    let inputs = DMatrix::from_fn(2, 2000, |i, k| ((i + k) as f64 * 0.01).sin());
    c.bench_function("reduced_L20_2000_steps", |b| b.iter(|| simulate_reduced(&model, &z0, black_box(&inputs), 2000).unwrap()));
}

criterion_group!(benches, kron_power, full_model, memory_inference, reduced_simulation);
criterion_main!(benches);
