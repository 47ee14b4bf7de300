use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};
use morphic_core::entropy_fisher::estimators;
use morphic_core::packets::GaussianPacket;
use morphic_core::*;

fn pinv(c: &mut Criterion) {
    let data: Vec<f64> = (0..8 * 5).map(|i| ((i * 37 % 11) as f64 - 5.0) / 3.0 + if i % 6 == 0 { 2.0 } else { 0.0 }).collect();
    let j = RectJacobian::from_row_slice(8, 5, &data).unwrap();
    c.bench_function("pseudo_inverse_8x5", |b| b.iter(|| pseudo_inverse(black_box(&j)).unwrap()));
    c.bench_function("projection_operator_8x5", |b| b.iter(|| projection_operator(black_box(&j)).unwrap()));
}

fn quantum_potential(c: &mut Criterion) {
    let consts = PhysicalConstants::default();
    let line = Grid::new(vec![Axis::from_range(-5.0, 5.0, 0.01).unwrap()]).unwrap();
    let w = ScalarField::from_fn(&line, "W", |x| (-x[0] * x[0] / 2.0).exp());
    c.bench_function("quantum_potential_1d_1001", |b| {
        b.iter(|| quantum_potential_w(black_box(&w), &consts, QMode::Microstate).unwrap())
    });
    let ax = Axis::from_range(-3.0, 3.0, 0.02).unwrap();
    let plane = Grid::plane(ax, ax).unwrap();
    let w2 = ScalarField::from_fn(&plane, "W", |x| (-(x[0] * x[0] + x[1] * x[1]) / 2.0).exp());
    c.bench_function("quantum_potential_2d_301x301", |b| {
        b.iter(|| quantum_potential_w(black_box(&w2), &consts, QMode::Standard).unwrap())
    });
}

fn trajectories(c: &mut Criterion) {
    let consts = PhysicalConstants::default();
    let packet = GaussianPacket::new(0.0, 0.5, 0.5, &consts).unwrap();
    let line = Grid::new(vec![Axis::from_range(-8.0, 8.0, 0.01).unwrap()]).unwrap();
    let rho = ScalarField::from_fn(&line, "rho", |x| packet.density(x[0], 0.0));
    let guidance =
        GuidanceField::from_phase_gradient(vec![(-8.0, 8.0)], 0.0, move |x, t| vec![packet.velocity(x[0], t)]).unwrap();
    let init = InitialEnsemble::Sampled { density: rho, count: 1_000, seed: 1, symmetric: false };
    c.bench_function("bohmian_1000_particles_100_steps", |b| {
        b.iter(|| bohmian_trajectories(&guidance, &consts, black_box(&init), 0.01, 1.0).unwrap())
    });
}

fn fisher_mc(c: &mut Criterion) {
    let mut group = c.benchmark_group("fisher");
    group.sample_size(10);
    group.bench_function("mc_covariance_1000x100", |b| {
        b.iter(|| {
            mc_estimator_covariance(ParametricDistribution::Gaussian, &[0.0, 1.0], estimators::gaussian_mle, 1_000, 100, 7)
                .unwrap()
        })
    });
    group.bench_function("score_oracle_gaussian", |b| {
        b.iter(|| score_fisher_oracle(ParametricDistribution::Gaussian, black_box(&[0.0, 1.0])).unwrap())
    });
    group.finish();
}

criterion_group!(benches, pinv, quantum_potential, trajectories, fisher_mc);
criterion_main!(benches);
