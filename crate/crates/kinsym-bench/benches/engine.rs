//! Benchmarks for the hot paths of the verification engine: residual
//! construction, numeric evaluation, bracket closure, dimension estimation,
//! and characteristic integration.

use std::collections::BTreeMap;

use criterion::{black_box, criterion_group, criterion_main, Criterion};

use kinsym_core::classify::{estimate_dimension, residual_merged, DimCfg};
use kinsym_core::expr::{self, is_zero, Env, SampleSpec, SymRange, ZeroCfg};
use kinsym_core::fields::{closure_check, lie_bracket, ClosureCfg, VectorField};
use kinsym_core::kinsim::{evaluate_solution, integrate_endpoint, CharState, OdeCfg};

fn projective_force() -> expr::Expr {
    expr::parse("P*f^-1").unwrap()
}

fn scaling_field() -> VectorField {
    VectorField::parse("t", "-x").unwrap()
}

fn bench_residual_build(c: &mut Criterion) {
    let force = projective_force();
    let field = scaling_field();
    c.bench_function("residual/build", |b| {
        b.iter(|| residual_merged(black_box(&force), black_box(&field)))
    });
}

fn bench_residual_eval(c: &mut Criterion) {
    let residual = residual_merged(&projective_force(), &scaling_field());
    let env = Env::from_pairs(&[
        ("t", 0.7),
        ("x", -1.3),
        ("c", 0.4),
        ("f", 1.1),
        ("P", 1.7),
    ]);
    c.bench_function("residual/eval", |b| {
        b.iter(|| black_box(&residual).eval(black_box(&env)).unwrap())
    });
}

fn bench_zero_test(c: &mut Criterion) {
    let residual = residual_merged(&projective_force(), &scaling_field());
    let spec = SampleSpec::default().with_range("P", SymRange::positive(0.2, 2.0));
    let cfg = ZeroCfg::default();
    c.bench_function("residual/is_zero", |b| {
        b.iter(|| is_zero(black_box(&residual), &spec, &cfg).unwrap())
    });
}

fn bench_bracket(c: &mut Criterion) {
    let a = VectorField::parse("t^2", "t*x").unwrap();
    let b2 = VectorField::parse("t", "x/2").unwrap();
    c.bench_function("fields/lie_bracket", |b| {
        b.iter(|| lie_bracket(black_box(&a), black_box(&b2)))
    });
}

fn bench_closure(c: &mut Criterion) {
    // The full 8-dimensional algebra of the free equation: 28 bracket pairs.
    let basis: Vec<VectorField> = [
        ("1", "0"),
        ("0", "1"),
        ("t", "0"),
        ("0", "t"),
        ("0", "x"),
        ("x", "0"),
        ("t^2", "t*x"),
        ("t*x", "x^2"),
    ]
    .iter()
    .map(|(tau, xi)| VectorField::parse(tau, xi).unwrap())
    .collect();
    let params = BTreeMap::new();
    let cfg = ClosureCfg::default();
    c.bench_function("fields/closure_check_dim8", |b| {
        b.iter(|| closure_check(black_box(&basis), &params, &cfg).unwrap())
    });
}

fn bench_dimension(c: &mut Criterion) {
    let force = expr::parse("0").unwrap();
    let spec = SampleSpec::default();
    let cfg = DimCfg::default();
    c.bench_function("classify/estimate_dimension_free", |b| {
        b.iter(|| estimate_dimension(black_box(&force), 3, &spec, &cfg).unwrap())
    });
}

fn bench_characteristic(c: &mut Criterion) {
    let force = expr::parse("-x").unwrap();
    let params = BTreeMap::new();
    let ode = OdeCfg::default();
    let s0 = CharState::new(0.0, 1.0, 0.0, 1.0);
    c.bench_function("kinsim/oscillator_period", |b| {
        b.iter(|| {
            integrate_endpoint(
                black_box(&force),
                &params,
                s0,
                2.0 * std::f64::consts::PI,
                &ode,
            )
            .unwrap()
        })
    });
}

fn bench_solution_sample(c: &mut Criterion) {
    let force = expr::parse("c").unwrap();
    let params = BTreeMap::new();
    let ode = OdeCfg::default();
    let f0 = |x: f64, cv: f64| (-(x * x + cv * cv)).exp();
    c.bench_function("kinsim/evaluate_solution", |b| {
        b.iter(|| {
            evaluate_solution(black_box(&force), &params, &f0, 1.0, 0.5, -0.2, &ode).unwrap()
        })
    });
}

criterion_group!(
    benches,
    bench_residual_build,
    bench_residual_eval,
    bench_zero_test,
    bench_bracket,
    bench_closure,
    bench_dimension,
    bench_characteristic,
    bench_solution_sample
);
criterion_main!(benches);
