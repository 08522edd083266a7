//! Sensor signals and their conditioning.
//!
//! Synthesises encoder, gyro and accelerometer readings from a simulated
//! trajectory, computes the accelerometer tilt baseline, designs and applies
//! the low-pass FIR used on presented results, and provides the discrete
//! derivative operators the estimators consume.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::dynamics::{PendulumParams, Trajectory};
use crate::error::{invalid, Error, Result};

/// One timestamped row of a sensor log.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SampleRecord {
    pub t: f64,
    /// Reference tilt from a pivot potentiometer or the simulator, if known.
    pub theta_true: Option<f64>,
    /// Pendulum encoder angle (rad).
    pub phi: f64,
    /// Body rate gyro (rad/s).
    pub gyro: f64,
    pub ax: f64,
    pub ay: f64,
}

/// Uniformly sampled sequence of [`SampleRecord`]s.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeSeries {
    pub dt: f64,
    pub start: f64,
    pub records: Vec<SampleRecord>,
}

impl TimeSeries {
    /// Builds a series and checks that record `i` sits at `start + i*dt`
    /// within 1e-9 s.
    pub fn new(dt: f64, start: f64, records: Vec<SampleRecord>) -> Result<Self> {
        let ts = Self { dt, start, records };
        ts.validate()?;
        Ok(ts)
    }

    /// Infers `dt` and `start` from the record timestamps.
    pub fn from_records(records: Vec<SampleRecord>) -> Result<Self> {
        if records.len() < 2 {
            return Err(Error::SequenceTooShort {
                len: records.len(),
                required: 2,
            });
        }
        let start = records[0].t;
        let dt = (records[records.len() - 1].t - start) / (records.len() - 1) as f64;
        Self::new(dt, start, records)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.dt.is_finite() && self.dt > 0.0) {
            return Err(invalid("dt", format!("must be > 0, got {}", self.dt)));
        }
        for (i, r) in self.records.iter().enumerate() {
            if !r.t.is_finite() || (r.t - (self.start + i as f64 * self.dt)).abs() > 1e-9 {
                return Err(Error::NonUniformSampling { index: i });
            }
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn times(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.t).collect()
    }

    pub fn phi(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.phi).collect()
    }

    pub fn gyro(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.gyro).collect()
    }

    /// The reference tilt column, if every record carries one.
    pub fn theta_true(&self) -> Option<Vec<f64>> {
        self.records.iter().map(|r| r.theta_true).collect()
    }

    /// Accelerometer angle per record; errors on a zero gravity vector.
    pub fn accel_angles(&self) -> Result<Vec<f64>> {
        self.records.iter().map(|r| accel_angle(r.ax, r.ay)).collect()
    }

    /// Records `[from, to)` as a new series.
    pub fn slice(&self, from: usize, to: usize) -> TimeSeries {
        let records = self.records[from..to].to_vec();
        TimeSeries {
            dt: self.dt,
            start: records.first().map_or(self.start, |r| r.t),
            records,
        }
    }
}

/// Tilt from the gravity components seen by a two-axis accelerometer,
/// `atan(ax / ay)` resolved to the correct quadrant, in `(-pi, pi]`.
pub fn accel_angle(ax: f64, ay: f64) -> Result<f64> {
    if !ax.is_finite() || !ay.is_finite() {
        return Err(Error::NonFinite("accelerometer sample"));
    }
    if ax == 0.0 && ay == 0.0 {
        return Err(Error::ZeroGravityVector);
    }
    let a = ax.atan2(ay);
    Ok(if a == -PI { PI } else { a })
}

/// Sensor error model for [`synthesize_sensors`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NoiseSpec {
    /// Initial gyro bias (rad/s).
    pub gyro_bias: f64,
    /// Bias random-walk intensity (rad/s per sqrt(s)).
    pub gyro_bias_walk_std: f64,
    pub gyro_white_std: f64,
    pub accel_white_std: f64,
    /// Total peak vibration amplitude (m/s²), split evenly across `vibration_freqs`.
    pub vibration_amp: f64,
    pub vibration_freqs: Vec<f64>,
    pub encoder_noise_std: f64,
    /// Encoder resolution (rad); 0 disables quantisation.
    pub encoder_quantum: f64,
    pub seed: u64,
}

impl Default for NoiseSpec {
    /// Engine-like vibration on the accelerometer with modest gyro noise.
    fn default() -> Self {
        Self {
            gyro_bias: 0.0,
            gyro_bias_walk_std: 0.0,
            gyro_white_std: 0.002,
            accel_white_std: 0.05,
            vibration_amp: 2.0,
            vibration_freqs: vec![37.0, 90.0, 180.0],
            encoder_noise_std: 0.0,
            encoder_quantum: 0.0,
            seed: 1,
        }
    }
}

impl NoiseSpec {
    /// All error sources disabled.
    pub fn noiseless() -> Self {
        Self {
            gyro_white_std: 0.0,
            accel_white_std: 0.0,
            vibration_amp: 0.0,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let checks = [
            ("gyro_bias_walk_std", self.gyro_bias_walk_std),
            ("gyro_white_std", self.gyro_white_std),
            ("accel_white_std", self.accel_white_std),
            ("vibration_amp", self.vibration_amp),
            ("encoder_noise_std", self.encoder_noise_std),
            ("encoder_quantum", self.encoder_quantum),
        ];
        for (name, v) in checks {
            if !(v.is_finite() && v >= 0.0) {
                return Err(invalid(name, format!("must be >= 0, got {v}")));
            }
        }
        if !self.gyro_bias.is_finite() {
            return Err(invalid("gyro_bias", "must be finite"));
        }
        if self.vibration_freqs.iter().any(|f| !(f.is_finite() && *f >= 0.0)) {
            return Err(invalid("vibration_freqs", "frequencies must be >= 0"));
        }
        Ok(())
    }
}

/// Generates sensor readings for a simulated trajectory.
///
/// Draw order from the seeded stream is fixed (vibration phases first, then
/// per sample: bias walk, gyro, ax, ay, encoder), so a given `NoiseSpec`
/// always yields the same output.
pub fn synthesize_sensors(
    truth: &Trajectory,
    p: &PendulumParams,
    noise: &NoiseSpec,
) -> Result<TimeSeries> {
    noise.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(noise.seed);
    let nf = noise.vibration_freqs.len();
    let tone_amp = if nf == 0 {
        0.0
    } else {
        noise.vibration_amp / nf as f64
    };
    let mut phases = [Vec::with_capacity(nf), Vec::with_capacity(nf)];
    for axis in &mut phases {
        for _ in 0..nf {
            axis.push(rng.random::<f64>() * 2.0 * PI);
        }
    }
    let vibration = |axis: usize, t: f64| -> f64 {
        noise
            .vibration_freqs
            .iter()
            .zip(&phases[axis])
            .map(|(f, ph)| tone_amp * (2.0 * PI * f * t + ph).sin())
            .sum()
    };

    let walk_step = noise.gyro_bias_walk_std * truth.dt.sqrt();
    let mut bias = noise.gyro_bias;
    let g = p.gravity;
    let mut records = Vec::with_capacity(truth.len());
    for (i, s) in truth.states.iter().enumerate() {
        let z_walk: f64 = rng.sample(StandardNormal);
        let z_gyro: f64 = rng.sample(StandardNormal);
        let z_ax: f64 = rng.sample(StandardNormal);
        let z_ay: f64 = rng.sample(StandardNormal);
        let z_enc: f64 = rng.sample(StandardNormal);
        if i > 0 {
            bias += walk_step * z_walk;
        }

        let mut phi = s.phi;
        if noise.encoder_quantum > 0.0 {
            phi = (phi / noise.encoder_quantum).round() * noise.encoder_quantum;
        }
        phi += noise.encoder_noise_std * z_enc;

        records.push(SampleRecord {
            t: s.t,
            theta_true: Some(s.theta),
            phi,
            gyro: s.theta_dot + bias + noise.gyro_white_std * z_gyro,
            ax: g * s.theta.sin() + vibration(0, s.t) + noise.accel_white_std * z_ax,
            ay: g * s.theta.cos() + vibration(1, s.t) + noise.accel_white_std * z_ay,
        });
    }
    Ok(TimeSeries {
        dt: truth.dt,
        start: truth.states.first().map_or(0.0, |s| s.t),
        records,
    })
}

/// Linear-phase low-pass FIR filter.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FirFilter {
    pub taps: Vec<f64>,
    pub order: usize,
    pub cutoff_hz: f64,
    pub sample_rate_hz: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FirMode {
    /// Plain convolution from a zero initial state; delays by `order/2` samples.
    Causal,
    /// Forward-backward pass with edge padding; no net delay.
    ZeroPhase,
}

/// Filtered samples plus the delay they carry relative to the input.
#[derive(Debug, Clone, PartialEq)]
pub struct FirOutput {
    pub values: Vec<f64>,
    pub delay_samples: f64,
}

/// Windowed-sinc (Hamming) low-pass design normalised to unit DC gain.
pub fn design_fir(order: usize, cutoff_hz: f64, sample_rate_hz: f64) -> Result<FirFilter> {
    if order < 2 || !order.is_multiple_of(2) {
        return Err(invalid("order", format!("must be even and >= 2, got {order}")));
    }
    if !(sample_rate_hz.is_finite() && sample_rate_hz > 0.0) {
        return Err(invalid("sample_rate_hz", "must be > 0"));
    }
    if !(cutoff_hz > 0.0 && cutoff_hz < sample_rate_hz / 2.0) {
        return Err(invalid(
            "cutoff_hz",
            format!("must lie in (0, {}) Hz, got {cutoff_hz}", sample_rate_hz / 2.0),
        ));
    }
    let fc = cutoff_hz / sample_rate_hz;
    let half = (order / 2) as isize;
    let mut taps: Vec<f64> = (0..=order)
        .map(|i| {
            let m = i as isize - half;
            let ideal = if m == 0 {
                2.0 * fc
            } else {
                let x = m as f64;
                (2.0 * PI * fc * x).sin() / (PI * x)
            };
            let w = 0.54 - 0.46 * (2.0 * PI * i as f64 / order as f64).cos();
            ideal * w
        })
        .collect();
    let sum: f64 = taps.iter().sum();
    taps.iter_mut().for_each(|t| *t /= sum);
    // the window is only symmetric up to rounding in cos; mirror exactly
    for i in 0..order / 2 {
        let avg = 0.5 * (taps[i] + taps[order - i]);
        taps[i] = avg;
        taps[order - i] = avg;
    }
    Ok(FirFilter {
        taps,
        order,
        cutoff_hz,
        sample_rate_hz,
    })
}

impl FirFilter {
    /// Magnitude of the frequency response at `freq_hz`.
    pub fn magnitude(&self, freq_hz: f64) -> f64 {
        let w = 2.0 * PI * freq_hz / self.sample_rate_hz;
        let (re, im) = self
            .taps
            .iter()
            .enumerate()
            .fold((0.0, 0.0), |(re, im), (n, h)| {
                (re + h * (w * n as f64).cos(), im - h * (w * n as f64).sin())
            });
        (re * re + im * im).sqrt()
    }

    pub fn group_delay(&self) -> f64 {
        self.order as f64 / 2.0
    }

    fn convolve(&self, x: &[f64]) -> Vec<f64> {
        (0..x.len())
            .map(|n| {
                self.taps
                    .iter()
                    .take(n + 1)
                    .enumerate()
                    .map(|(k, h)| h * x[n - k])
                    .sum()
            })
            .collect()
    }
}

pub fn apply_fir(f: &FirFilter, x: &[f64], mode: FirMode) -> Result<FirOutput> {
    if x.len() <= f.taps.len() {
        return Err(Error::SequenceTooShort {
            len: x.len(),
            required: f.taps.len() + 1,
        });
    }
    match mode {
        FirMode::Causal => Ok(FirOutput {
            values: f.convolve(x),
            delay_samples: f.group_delay(),
        }),
        FirMode::ZeroPhase => {
            let pad = 3 * f.taps.len();
            let first = x[0];
            let last = x[x.len() - 1];
            let mut padded = Vec::with_capacity(x.len() + 2 * pad);
            padded.extend(std::iter::repeat_n(first, pad));
            padded.extend_from_slice(x);
            padded.extend(std::iter::repeat_n(last, pad));
            let mut y = f.convolve(&padded);
            y.reverse();
            let mut y = f.convolve(&y);
            y.reverse();
            Ok(FirOutput {
                values: y[pad..pad + x.len()].to_vec(),
                delay_samples: 0.0,
            })
        }
    }
}

/// Derivative approximation used on sampled signals.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DiffScheme {
    /// Symmetric differences; needs the next sample, so offline only.
    Central,
    /// Causal differences over past samples.
    Backward,
}

impl DiffScheme {
    /// Leading samples whose first/second derivative lacks history.
    pub fn warmup(self, order: usize) -> usize {
        match self {
            DiffScheme::Central => 0,
            DiffScheme::Backward => order,
        }
    }
}

/// Windowed gyro derivative `(G_k - G_{k-w}) / (dt * w)`.
pub fn windowed_gyro_diff(g: &[f64], k: usize, w: usize, dt: f64) -> Result<f64> {
    if w == 0 {
        return Err(invalid("window", "must be >= 1"));
    }
    if !(dt > 0.0) {
        return Err(invalid("dt", "must be > 0"));
    }
    if k < w {
        return Err(Error::InsufficientHistory { index: k, window: w });
    }
    if k >= g.len() {
        return Err(Error::SequenceTooShort {
            len: g.len(),
            required: k + 1,
        });
    }
    Ok((g[k] - g[k - w]) / (dt * w as f64))
}

fn check_diff_input(x: &[f64], dt: f64) -> Result<()> {
    if x.len() < 3 {
        return Err(Error::SequenceTooShort {
            len: x.len(),
            required: 3,
        });
    }
    if !(dt.is_finite() && dt > 0.0) {
        return Err(invalid("dt", format!("must be > 0, got {dt}")));
    }
    Ok(())
}

/// First derivative of a uniformly sampled sequence.
///
/// Central: interior `(x[k+1] - x[k-1]) / 2dt`, one-sided at both ends.
/// Backward: `(x[k] - x[k-1]) / dt`; index 0 has no history and repeats
/// index 1.
pub fn finite_diff1(x: &[f64], dt: f64, scheme: DiffScheme) -> Result<Vec<f64>> {
    check_diff_input(x, dt)?;
    let n = x.len();
    let mut d = vec![0.0; n];
    match scheme {
        DiffScheme::Central => {
            d[0] = (x[1] - x[0]) / dt;
            d[n - 1] = (x[n - 1] - x[n - 2]) / dt;
            for k in 1..n - 1 {
                d[k] = (x[k + 1] - x[k - 1]) / (2.0 * dt);
            }
        }
        DiffScheme::Backward => {
            for k in 1..n {
                d[k] = (x[k] - x[k - 1]) / dt;
            }
            d[0] = d[1];
        }
    }
    Ok(d)
}

/// Second derivative of a uniformly sampled sequence.
///
/// Central: interior `(x[k+1] - 2x[k] + x[k-1]) / dt²`, ends copy their
/// neighbour. Backward: `(x[k] - 2x[k-1] + x[k-2]) / dt²`; the first two
/// indices repeat index 2.
pub fn finite_diff2(x: &[f64], dt: f64, scheme: DiffScheme) -> Result<Vec<f64>> {
    check_diff_input(x, dt)?;
    let n = x.len();
    let dt2 = dt * dt;
    let mut d = vec![0.0; n];
    match scheme {
        DiffScheme::Central => {
            for k in 1..n - 1 {
                d[k] = (x[k + 1] - 2.0 * x[k] + x[k - 1]) / dt2;
            }
            d[0] = d[1];
            d[n - 1] = d[n - 2];
        }
        DiffScheme::Backward => {
            for k in 2..n {
                d[k] = (x[k] - 2.0 * x[k - 1] + x[k - 2]) / dt2;
            }
            d[0] = d[2];
            d[1] = d[2];
        }
    }
    Ok(d)
}
