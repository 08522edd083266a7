//! Fixtures shared by the benchmarks in `benches/`.

use pendtilt::sensors::synthesize_sensors;
use pendtilt::{sigmoid_profile, simulate_pendulum, NoiseSpec, PendulumParams, TimeSeries};

/// Sigmoid tilt under engine-like vibration, sampled at 1 kHz.
pub fn vibration_log(seconds: f64) -> (PendulumParams, TimeSeries) {
    let p = PendulumParams {
        damping: 5e-3,
        ..Default::default()
    };
    let profile = sigmoid_profile(0.5, 8.0, seconds / 2.0).expect("valid profile");
    let tr = simulate_pendulum(&p, &profile, 0.0, 0.0, 1e-3, seconds).expect("simulation");
    let s = synthesize_sensors(&tr, &p, &NoiseSpec::default()).expect("sensors");
    (p, s)
}

/// Noise-free swing around a slow sigmoid, suited to parameter fits.
pub fn swing_log(seconds: f64) -> (PendulumParams, TimeSeries) {
    let p = PendulumParams::default();
    let profile = sigmoid_profile(0.5, 2.0, seconds / 2.0).expect("valid profile");
    let tr = simulate_pendulum(&p, &profile, profile.angle(0.0) + 0.05, 0.0, 1e-3, seconds).expect("simulation");
    let s = synthesize_sensors(&tr, &p, &NoiseSpec::noiseless()).expect("sensors");
    (p, s)
}
