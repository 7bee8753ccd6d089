use criterion::{criterion_group, criterion_main, Criterion};
use feasible_bench::{first_batch, trainer, two_moons, BATCH};
use feasible_core::models::{weighted_loss_grad, LossKind};
use feasible_core::trainer::Method;

fn steps(c: &mut Criterion) {
    let ds = two_moons();
    let batch = first_batch(&ds);
    let mut group = c.benchmark_group("step");
    for method in [Method::Erm, Method::Fl, Method::Rfl, Method::Cserm] {
        let mut t = trainer(method, &ds);
        group.bench_function(method.name(), |b| b.iter(|| t.step(&batch).unwrap()));
    }
    group.finish();
}

fn gradient(c: &mut Criterion) {
    let ds = two_moons();
    let batch = first_batch(&ds);
    let t = trainer(Method::Erm, &ds);
    let w = vec![1.0 / BATCH as f64; BATCH];
    c.bench_function("weighted_loss_grad", |b| {
        b.iter(|| weighted_loss_grad(t.model(), &batch, LossKind::CrossEntropy, &w).unwrap())
    });
}

criterion_group!(benches, steps, gradient);
criterion_main!(benches);
