use criterion::{criterion_group, criterion_main, Criterion};
use pvaug::mlp::{mlp_train, Mlp, MlpSpec};
use pvaug_bench::normal;

fn epoch(c: &mut Criterion) {
    let mut group = c.benchmark_group("mlp_one_epoch");
    group.sample_size(10);
    let x = normal(170, 100, 2);
    let y: Vec<f64> = x.column(0).iter().map(|v| 2.0 * v).collect();
    let mut spec = MlpSpec::tecator();
    spec.epochs = 1;
    group.bench_function("tecator_170_rows", |b| b.iter(|| mlp_train(&spec, &x, &y).unwrap()));

    let x = normal(219, 17, 3);
    let y: Vec<f64> = (0..219).map(|i| (i % 2) as f64).collect();
    let mut spec = MlpSpec::heart();
    spec.epochs = 1;
    group.bench_function("heart_219_rows", |b| b.iter(|| mlp_train(&spec, &x, &y).unwrap()));
    group.finish();
}

fn gradient(c: &mut Criterion) {
    let model = Mlp::new(&MlpSpec::tecator()).unwrap();
    let x = normal(10, 100, 4);
    let y = vec![0.5; 10];
    c.bench_function("tecator_gradient_batch_10", |b| b.iter(|| model.gradient(&x, &y).unwrap()));
}

criterion_group!(benches, epoch, gradient);
criterion_main!(benches);
