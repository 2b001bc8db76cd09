use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BatchSize, Criterion};
use proca_core::bank::herd_select_features;
use proca_core::detector::cumulative_probabilities;
use proca_core::model::backward;
use proca_core::pseudo::pseudo_label_pipeline;
use proca_core::trainer::pretrain_for_run;
use proca_core::{adapt_step, detect_shared, forward, gen_synthetic, HyperParams, Matrix, ModelParams, PrototypeBank, RngStream, SynthConfig};

fn gaussian(rows: usize, cols: usize, rng: &mut RngStream) -> Matrix {
    Matrix::from_vec(rows, cols, (0..rows * cols).map(|_| rng.normal()).collect()).unwrap()
}

fn model_kernels(c: &mut Criterion) {
    let mut rng = RngStream::new(0, "bench");
    let params = ModelParams::init(8, 64, 12, &mut rng).unwrap();
    let x = gaussian(32, 8, &mut rng);
    c.bench_function("forward_b32", |b| b.iter(|| forward(black_box(&params), black_box(&x)).unwrap()));

    let trace = forward(&params, &x).unwrap();
    let dl = gaussian(32, 12, &mut rng);
    let df = gaussian(32, 64, &mut rng);
    c.bench_function("backward_b32", |b| {
        b.iter(|| backward(black_box(&params), &trace, black_box(&dl), black_box(&df)).unwrap())
    });

    let target = gaussian(500, 8, &mut rng);
    c.bench_function("detect_500", |b| {
        b.iter(|| detect_shared(&cumulative_probabilities(&params, black_box(&target)).unwrap(), 0.15).unwrap())
    });
    let shared = detect_shared(&cumulative_probabilities(&params, &target).unwrap(), 0.15).unwrap();
    c.bench_function("pseudo_labels_500", |b| {
        b.iter(|| pseudo_label_pipeline(&params, black_box(&target), &shared).unwrap())
    });
}

fn herding(c: &mut Criterion) {
    let mut rng = RngStream::new(1, "herd");
    let feats = gaussian(200, 64, &mut rng);
    c.bench_function("herd_200x64_m10", |b| b.iter(|| herd_select_features(black_box(&feats), 10)));
}

fn adaptation(c: &mut Criterion) {
    let (source, stream) = gen_synthetic(&SynthConfig::default()).unwrap();
    let hp = HyperParams {
        epochs_per_step: 10,
        hidden_dim: 64,
        learning_rate: 5e-3,
        ..HyperParams::default()
    };
    let params = pretrain_for_run(&source, &hp).unwrap();
    let bank = PrototypeBank::new(hp.prototypes_per_class).unwrap();
    let target = &stream.steps[0].features;
    let mut g = c.benchmark_group("adapt");
    g.sample_size(10);
    g.bench_function("adapt_step_10_epochs", |b| {
        b.iter_batched(
            || RngStream::new(0, "step1"),
            |mut rng| adapt_step(&params, &bank, &source, target, &hp, &mut rng).unwrap(),
            BatchSize::SmallInput,
        )
    });
    g.finish();
}

criterion_group!(benches, model_kernels, herding, adaptation);
criterion_main!(benches);
