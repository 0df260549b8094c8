use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use misclass_core::analysis::compare;
use misclass_core::sampler::{initialize_target, transition, Hamiltonian};
use misclass_core::sim::{generate_dataset, ScenarioConfig};
use misclass_core::*;

fn desk_model(variant: Variant) -> Model {
    let data = generate_dataset(&ScenarioConfig::desk(Variant::FullyHet), 1).unwrap();
    Model::new(ModelSpec::new(variant, Hyperparams::default(), data.countries, data.counts).unwrap()).unwrap()
}

fn gradient(c: &mut Criterion) {
    let mut g = c.benchmark_group("log_posterior_gradient");
    for variant in Variant::ALL {
        let model = desk_model(variant);
        let u = initialize_target(&model, 1, 0).unwrap();
        let mut grad = vec![0.0; model.dim()];
        g.bench_with_input(BenchmarkId::from_parameter(variant), &u, |b, u| {
            b.iter(|| model.log_density_grad(black_box(u), &mut grad))
        });
    }
    g.finish();
}

fn nuts_transition(c: &mut Criterion) {
    let mut g = c.benchmark_group("nuts_transition");
    for variant in [Variant::Homogeneous, Variant::FullyHet] {
        let model = desk_model(variant);
        let ham = Hamiltonian::new(&model, vec![1.0; model.dim()]);
        let start = ham.point(initialize_target(&model, 1, 0).unwrap());
        let mut r = rng::stream(1, 0);
        g.bench_function(BenchmarkId::from_parameter(variant), |b| {
            b.iter(|| transition(&ham, &start, 0.05, 10, &mut r))
        });
    }
    g.finish();
}

fn criteria(c: &mut Criterion) {
    let mut r = rng::stream(2, 0);
    let ll: Vec<Vec<f64>> = (0..1000)
        .map(|_| (0..30).map(|_| -3.0 * rng::uniform(&mut r)).collect())
        .collect();
    c.bench_function("waic_and_psis_loo_1000x30", |b| b.iter(|| compare(black_box(&ll)).unwrap()));
}

fn base_matrix(c: &mut Criterion) {
    let p = BaseParams::new(vec![0.6, 0.5, 0.4, 0.7, 0.3], vec![0.3, 0.25, 0.2, 0.15, 0.1]).unwrap();
    c.bench_function("build_base_matrix_c5", |b| b.iter(|| build_base_matrix(black_box(&p))));
}

criterion_group!(benches, gradient, nuts_transition, criteria, base_matrix);
criterion_main!(benches);
