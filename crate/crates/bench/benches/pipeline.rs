use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};
use nalgebra::Matrix2;

use pendtilt::kalman::run_filter;
use pendtilt::optim::fit_parameters;
use pendtilt::sensors::{apply_fir, design_fir};
use pendtilt::*;
use pendtilt_bench::{swing_log, vibration_log};

fn simulate(c: &mut Criterion) {
    let p = PendulumParams::default();
    let profile = sigmoid_profile(0.5, 8.0, 5.0).unwrap();
    c.bench_function("simulate_10s", |b| {
        b.iter(|| simulate_pendulum(black_box(&p), &profile, 0.0, 0.0, 1e-3, 10.0).unwrap())
    });
}

fn estimators(c: &mut Criterion) {
    let (p, s) = vibration_log(10.0);
    let (phi, gyro) = (s.phi(), s.gyro());
    let cfg = EstimatorConfig::offline(1e-3).with_scale_from(&p);
    let a = Algo12Params::from_pendulum(&p);
    let a3 = Algo3Params::matching_algo2(&p);
    let mut g = c.benchmark_group("estimate_10k");
    g.bench_function("algo1", |b| b.iter(|| estimate_algo1(black_box(&phi), &a, &cfg).unwrap()));
    g.bench_function("algo2", |b| b.iter(|| estimate_algo2(black_box(&phi), &gyro, &a, &cfg).unwrap()));
    g.bench_function("algo3", |b| b.iter(|| estimate_algo3(black_box(&phi), &gyro, &a3, &cfg).unwrap()));
    let fir = design_fir(50, 20.0, 1000.0).unwrap();
    g.bench_function("fir_zero_phase", |b| {
        b.iter(|| apply_fir(&fir, black_box(&phi), FirMode::ZeroPhase).unwrap())
    });
    g.finish();
}

fn newton(c: &mut Criterion) {
    let (p, s) = swing_log(4.0);
    let cfg = EstimatorConfig::offline(1e-3).with_scale_from(&p);
    let ctx = CostContext::from_series(CostKind::OfflineTruth, Algorithm::Algo2, &s, &cfg, None).unwrap();
    let truth = Algorithm::Algo2.nominal_params(&p);
    let p0 = ParamVector::for_algorithm(Algorithm::Algo2, truth.iter().map(|v| 1.5 * v).collect()).unwrap();
    let newton = NewtonConfig::default();
    let mut g = c.benchmark_group("newton");
    g.sample_size(20);
    g.bench_function("offline_algo2_4s", |b| b.iter(|| fit_parameters(&ctx, black_box(&p0), &newton).unwrap()));
    g.finish();
}

fn kalman(c: &mut Criterion) {
    let (_, s) = vibration_log(10.0);
    let z: Vec<Option<f64>> = s.accel_angles().unwrap().into_iter().map(Some).collect();
    let gyro = s.gyro();
    let model = KalmanModel::imu(1e-3, 1e-6, 1e-8, 1e-3).unwrap();
    let x0 = KalmanState::new(0.0, 0.0, Matrix2::new(1.0, 0.0, 0.0, 1e-2));
    c.bench_function("kalman_10k", |b| b.iter(|| run_filter(&model, &x0, black_box(&gyro), &z).unwrap()));
}

criterion_group!(benches, simulate, estimators, newton, kalman);
criterion_main!(benches);
