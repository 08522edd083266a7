//! Linear Kalman filter for one tilt angle with gyro bias, `x = [theta; b]`.
//!
//! ```text
//! x_k = A x_{k-1} + B u      A = [[1, -dt], [0, 1]], B = [dt; 0]
//! z_k = H x_k                H = [1, 0]
//! ```
//!
//! where `u` is the gyro rate and `z` any tilt measurement: the accelerometer
//! angle or a pendulum estimator's output.

use nalgebra::{DMatrix, DVector, Matrix1x2, Matrix2, Vector2};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KalmanModel {
    pub a: Matrix2<f64>,
    pub b: Vector2<f64>,
    pub h: Matrix1x2<f64>,
    pub q: Matrix2<f64>,
    pub r: f64,
    pub dt: f64,
    /// Use the Joseph-form covariance update instead of `P - K H P`.
    pub joseph: bool,
}

/// Default per-step process noise on angle and bias.
pub const DEFAULT_Q: [f64; 2] = [1e-6, 1e-8];

impl KalmanModel {
    /// Tilt/bias model for sample period `dt` with diagonal process noise.
    pub fn imu(dt: f64, q_angle: f64, q_bias: f64, r: f64) -> Result<Self> {
        let m = Self {
            a: Matrix2::new(1.0, -dt, 0.0, 1.0),
            b: Vector2::new(dt, 0.0),
            h: Matrix1x2::new(1.0, 0.0),
            q: Matrix2::new(q_angle, 0.0, 0.0, q_bias),
            r,
            dt,
            joseph: false,
        };
        m.validate()?;
        Ok(m)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.dt.is_finite() && self.dt > 0.0) {
            return Err(invalid("dt", "must be > 0"));
        }
        if !(self.r.is_finite() && self.r > 0.0) {
            return Err(invalid("r", format!("must be > 0, got {}", self.r)));
        }
        if (self.q - self.q.transpose()).amax() > 0.0 {
            return Err(invalid("q", "must be symmetric"));
        }
        if self.q.symmetric_eigenvalues().min() < 0.0 {
            return Err(invalid("q", "must be positive semidefinite"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KalmanState {
    pub x: Vector2<f64>,
    pub p: Matrix2<f64>,
}

impl KalmanState {
    pub fn new(theta: f64, bias: f64, p: Matrix2<f64>) -> Self {
        Self {
            x: Vector2::new(theta, bias),
            p,
        }
    }

    pub fn theta(&self) -> f64 {
        self.x[0]
    }

    pub fn bias(&self) -> f64 {
        self.x[1]
    }
}

fn symmetrize(p: Matrix2<f64>) -> Matrix2<f64> {
    (p + p.transpose()) * 0.5
}

/// Time update driven by gyro rate `u`.
pub fn predict(state: &KalmanState, model: &KalmanModel, u: f64) -> KalmanState {
    KalmanState {
        x: model.a * state.x + model.b * u,
        p: symmetrize(model.a * state.p * model.a.transpose() + model.q),
    }
}

/// Measurement update with tilt measurement `z`.
pub fn update(state: &KalmanState, model: &KalmanModel, z: f64) -> Result<KalmanState> {
    let s = (model.h * state.p * model.h.transpose())[(0, 0)] + model.r;
    if !(s > 0.0) {
        return Err(invalid("innovation variance", format!("must be > 0, got {s}")));
    }
    let k: Vector2<f64> = state.p * model.h.transpose() / s;
    let innovation = z - (model.h * state.x)[(0, 0)];
    let x = state.x + k * innovation;
    let p = if model.joseph {
        let i_kh = Matrix2::identity() - k * model.h;
        i_kh * state.p * i_kh.transpose() + k * model.r * k.transpose()
    } else {
        state.p - k * model.h * state.p
    };
    Ok(KalmanState {
        x,
        p: symmetrize(p),
    })
}

/// Predict with `gyro[k]`, then update with `z[k]` when present.
pub fn run_filter(
    model: &KalmanModel,
    x0: &KalmanState,
    gyro: &[f64],
    z: &[Option<f64>],
) -> Result<Vec<KalmanState>> {
    model.validate()?;
    if gyro.len() != z.len() {
        return Err(Error::LengthMismatch {
            left: gyro.len(),
            right: z.len(),
        });
    }
    let mut state = *x0;
    let mut out = Vec::with_capacity(gyro.len());
    for (u, zk) in gyro.iter().zip(z) {
        state = predict(&state, model, *u);
        if let Some(zk) = zk {
            state = update(&state, model, *zk)?;
        }
        out.push(state);
    }
    Ok(out)
}

/// Scalar normal distribution.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Gaussian1D {
    pub mean: f64,
    pub variance: f64,
}

impl Gaussian1D {
    pub fn new(mean: f64, variance: f64) -> Result<Self> {
        if !(variance.is_finite() && variance > 0.0) {
            return Err(invalid("variance", format!("must be > 0, got {variance}")));
        }
        Ok(Self { mean, variance })
    }

    pub fn pdf(&self, x: f64) -> f64 {
        let d = x - self.mean;
        (-0.5 * d * d / self.variance).exp() / (2.0 * std::f64::consts::PI * self.variance).sqrt()
    }
}

/// Product of two normal densities, renormalised.
pub fn fuse_gaussians(a: &Gaussian1D, b: &Gaussian1D) -> Gaussian1D {
    let sum = a.variance + b.variance;
    Gaussian1D {
        mean: (a.mean * b.variance + b.mean * a.variance) / sum,
        variance: a.variance * b.variance / sum,
    }
}

/// Posterior variance after fusing prior variance `sigma_x` with measurement
/// variance `r`: `sigma_x * r / (sigma_x + r)`.
pub fn updated_sigma(sigma_x: f64, r: f64) -> f64 {
    sigma_x * r / (sigma_x + r)
}

/// Multivariate normal density with `|cov|^{-1/2} / (2 pi)^{k/2}` normalisation.
pub fn gaussian_pdf(x: &DVector<f64>, mean: &DVector<f64>, cov: &DMatrix<f64>) -> Result<f64> {
    let k = x.len();
    if mean.len() != k || cov.nrows() != k || cov.ncols() != k {
        return Err(Error::LengthMismatch {
            left: k,
            right: cov.nrows(),
        });
    }
    if (cov - cov.transpose()).amax() > 1e-12 * cov.amax().max(1.0) {
        return Err(Error::NotPositiveDefinite);
    }
    let chol = cov.clone().cholesky().ok_or(Error::NotPositiveDefinite)?;
    let d = x - mean;
    let maha = d.dot(&chol.solve(&d));
    let det = chol.determinant();
    Ok((-0.5 * maha).exp() / ((2.0 * std::f64::consts::PI).powi(k as i32) * det).sqrt())
}

/// Sample variance of `z` over `[from, from + len)`, skipping NaN entries,
/// floored at `min_variance`. Intended for a stretch of constant tilt.
pub fn calibrate_r(z: &[f64], from: usize, len: usize, min_variance: f64) -> Result<f64> {
    let end = (from + len).min(z.len());
    let vals: Vec<f64> = z[from.min(end)..end]
        .iter()
        .copied()
        .filter(|v| v.is_finite())
        .collect();
    if vals.len() < 2 {
        return Err(Error::EmptyValidRange);
    }
    let n = vals.len() as f64;
    let mean = vals.iter().sum::<f64>() / n;
    let var = vals.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
    Ok(var.max(min_variance))
}
