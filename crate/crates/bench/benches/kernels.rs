use basketopt_bench::{engine, mixed_scenario, phi};
use basketopt_core::distributions::{jsd, reg_inc_beta};
use basketopt_core::{BetaShapes, EvalBackend};
use criterion::{black_box, criterion_group, criterion_main, Criterion};

fn special_functions(c: &mut Criterion) {
    let p = BetaShapes::new(7.0, 15.0).unwrap();
    let q = BetaShapes::new(12.0, 10.0).unwrap();
    c.bench_function("jsd", |b| b.iter(|| jsd(black_box(&p), black_box(&q)).unwrap()));
    c.bench_function("reg_inc_beta", |b| b.iter(|| reg_inc_beta(black_box(0.2), black_box(p)).unwrap()));
}

fn operating_characteristics(c: &mut Criterion) {
    let scenario = mixed_scenario();
    let exact = engine(EvalBackend::Exact).unwrap();
    c.bench_function("exact_oc_4x20", |b| b.iter(|| exact.evaluate(black_box(&phi()), &scenario).unwrap()));
    let mc = engine(EvalBackend::monte_carlo(1000, 1856)).unwrap();
    c.bench_function("mc_oc_4x20_n1000", |b| b.iter(|| mc.evaluate(black_box(&phi()), &scenario).unwrap()));
}

criterion_group!(benches, special_functions, operating_characteristics);
criterion_main!(benches);
