//! Tilt estimators built on the pendulum equation of motion.
//!
//! Rearranging the pendulum equation for the body tilt gives
//!
//! ```text
//! theta = phi + asin((C*phi_dot + I_p*(phi_ddot - theta_ddot)) / (g*l_p*m_p))
//! ```
//!
//! - [`estimate_algo1`] drops `theta_ddot` and needs only the encoder.
//! - [`estimate_algo2`] replaces `theta_ddot` by the windowed gyro derivative.
//! - [`estimate_algo3`] frees all four coefficients, `(K, L, M, N)` in
//!   `phi + asin((K*phi_dot + L*phi_ddot + M*G_d) / scale) + N*G`, for live
//!   supervision. `N*G` is a rate feed-forward that offsets processing delay.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::dynamics::PendulumParams;
use crate::error::{invalid, Error, Result};
use crate::sensors::{finite_diff1, finite_diff2, DiffScheme};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Algorithm {
    Algo1,
    Algo2,
    Algo3,
}

impl Algorithm {
    pub fn name(self) -> &'static str {
        match self {
            Algorithm::Algo1 => "algo1",
            Algorithm::Algo2 => "algo2",
            Algorithm::Algo3 => "algo3",
        }
    }

    pub fn param_labels(self) -> &'static [&'static str] {
        match self {
            Algorithm::Algo1 | Algorithm::Algo2 => &["kappa", "iota"],
            Algorithm::Algo3 => &["damping", "inertia", "gyro_accel", "rate_lead"],
        }
    }

    pub fn uses_gyro(self) -> bool {
        !matches!(self, Algorithm::Algo1)
    }

    /// Physically consistent parameters for the given pendulum.
    pub fn nominal_params(self, p: &PendulumParams) -> Vec<f64> {
        match self {
            Algorithm::Algo1 | Algorithm::Algo2 => {
                let a = Algo12Params::from_pendulum(p);
                vec![a.kappa, a.iota]
            }
            Algorithm::Algo3 => Algo3Params::matching_algo2(p).to_vec(),
        }
    }
}

impl std::str::FromStr for Algorithm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "algo1" => Ok(Algorithm::Algo1),
            "algo2" => Ok(Algorithm::Algo2),
            "algo3" => Ok(Algorithm::Algo3),
            _ => Err(invalid("algorithm", format!("unknown algorithm `{s}`"))),
        }
    }
}

/// Normalised parameters of the first two estimators.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Algo12Params {
    /// `C / (m_p g l_p)` (s).
    pub kappa: f64,
    /// `I_p / (m_p g l_p)` (s²).
    pub iota: f64,
}

impl Algo12Params {
    pub fn new(kappa: f64, iota: f64) -> Result<Self> {
        let p = Self { kappa, iota };
        p.validate()?;
        Ok(p)
    }

    pub fn from_pendulum(p: &PendulumParams) -> Self {
        let scale = p.restoring_scale();
        Self {
            kappa: p.damping / scale,
            iota: p.inertia / scale,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.iota.is_finite() && self.iota > 0.0) {
            return Err(invalid("iota", format!("must be > 0, got {}", self.iota)));
        }
        if !(self.kappa.is_finite() && self.kappa >= 0.0) {
            return Err(invalid("kappa", format!("must be >= 0, got {}", self.kappa)));
        }
        Ok(())
    }
}

/// Supervised coefficients `(K, L, M, N)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Algo3Params {
    /// `K`, multiplies `phi_dot` (N·m·s/rad).
    pub damping: f64,
    /// `L`, multiplies `phi_ddot` (kg·m²).
    pub inertia: f64,
    /// `M`, multiplies the gyro derivative (kg·m²).
    pub gyro_accel: f64,
    /// `N`, multiplies the gyro rate (s).
    pub rate_lead: f64,
}

impl Algo3Params {
    /// `(C, I_p, -I_p, 0)`, which reproduces the second estimator.
    pub fn matching_algo2(p: &PendulumParams) -> Self {
        Self {
            damping: p.damping,
            inertia: p.inertia,
            gyro_accel: -p.inertia,
            rate_lead: 0.0,
        }
    }

    pub fn from_slice(v: &[f64]) -> Result<Self> {
        match *v {
            [damping, inertia, gyro_accel, rate_lead] => {
                let p = Self {
                    damping,
                    inertia,
                    gyro_accel,
                    rate_lead,
                };
                if p.to_vec().iter().all(|x| x.is_finite()) {
                    Ok(p)
                } else {
                    Err(Error::NonFinite("Algo3Params"))
                }
            }
            _ => Err(invalid("params", format!("expected 4 values, got {}", v.len()))),
        }
    }

    pub fn to_vec(&self) -> Vec<f64> {
        vec![self.damping, self.inertia, self.gyro_accel, self.rate_lead]
    }
}

/// What to do when the asin argument leaves `[-1, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ClampPolicy {
    /// Saturate at `±pi/2` and flag the sample.
    #[default]
    SaturateFlag,
    Reject,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EstimatorConfig {
    /// Sample period (s).
    pub dt: f64,
    /// Gyro differentiation window `w` (samples).
    pub window: usize,
    pub scheme: DiffScheme,
    pub clamp: ClampPolicy,
    /// `g * l_p * m_p` (N·m), the third estimator's normaliser.
    pub scale: f64,
}

impl Default for EstimatorConfig {
    fn default() -> Self {
        Self::offline(1e-3)
    }
}

impl EstimatorConfig {
    /// Central differences, for recorded data.
    pub fn offline(dt: f64) -> Self {
        Self {
            dt,
            window: 5,
            scheme: DiffScheme::Central,
            clamp: ClampPolicy::SaturateFlag,
            scale: PendulumParams::default().restoring_scale(),
        }
    }

    /// Backward differences, for causal processing.
    pub fn live(dt: f64) -> Self {
        Self {
            scheme: DiffScheme::Backward,
            ..Self::offline(dt)
        }
    }

    pub fn with_scale_from(mut self, p: &PendulumParams) -> Self {
        self.scale = p.restoring_scale();
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.dt.is_finite() && self.dt > 0.0) {
            return Err(invalid("dt", format!("must be > 0, got {}", self.dt)));
        }
        if self.window == 0 {
            return Err(invalid("window", "must be >= 1"));
        }
        if !(self.scale.is_finite() && self.scale > 0.0) {
            return Err(invalid("scale", format!("must be > 0, got {}", self.scale)));
        }
        Ok(())
    }
}

/// Per-sample tilt estimates. Samples outside `valid_from..valid_to` lack
/// derivative support; their `theta` is NaN and they are excluded from every
/// metric.
#[derive(Debug, Clone, PartialEq)]
pub struct EstimateSeries {
    pub theta: Vec<f64>,
    pub clamped: Vec<bool>,
    pub valid_from: usize,
    /// Exclusive end of the valid range.
    pub valid_to: usize,
}

impl EstimateSeries {
    pub fn len(&self) -> usize {
        self.theta.len()
    }

    pub fn is_empty(&self) -> bool {
        self.theta.is_empty()
    }

    pub fn get(&self, i: usize) -> Option<f64> {
        (i >= self.valid_from && i < self.valid_to)
            .then(|| self.theta.get(i).copied())
            .flatten()
    }

    pub fn valid(&self) -> &[f64] {
        let end = self.valid_to.min(self.theta.len());
        &self.theta[self.valid_from.min(end)..end]
    }

    pub fn clamp_count(&self) -> usize {
        self.clamped.iter().filter(|c| **c).count()
    }
}

/// Returns `(asin x, false)` inside `[-1, 1]`; outside, either saturates and
/// flags or errors, depending on `policy`.
pub fn clamped_asin(x: f64, policy: ClampPolicy) -> Result<(f64, bool)> {
    if !x.is_finite() {
        return Err(Error::NonFinite("asin argument"));
    }
    if x.abs() <= 1.0 {
        return Ok((x.asin(), false));
    }
    match policy {
        ClampPolicy::SaturateFlag => Ok((std::f64::consts::FRAC_PI_2.copysign(x), true)),
        ClampPolicy::Reject => Err(Error::AsinOutOfRange { index: 0, value: x }),
    }
}

/// Derivative signals feeding the estimators.
#[derive(Debug, Clone, PartialEq)]
pub struct Derivatives {
    pub phi_dot: Vec<f64>,
    pub phi_ddot: Vec<f64>,
    /// Windowed gyro derivative `G_d`; zeros when no gyro was supplied.
    pub gyro_accel: Vec<f64>,
    pub valid_from: usize,
    /// Exclusive end of the valid range. Central differences have no forward
    /// neighbour for the last sample, so it is excluded.
    pub valid_to: usize,
}

impl Derivatives {
    /// Differentiates sampled signals according to `cfg`.
    pub fn from_signals(phi: &[f64], gyro: Option<&[f64]>, cfg: &EstimatorConfig) -> Result<Self> {
        cfg.validate()?;
        let phi_dot = finite_diff1(phi, cfg.dt, cfg.scheme)?;
        let phi_ddot = finite_diff2(phi, cfg.dt, cfg.scheme)?;
        let mut valid_from = match cfg.scheme {
            DiffScheme::Central => 1,
            DiffScheme::Backward => 2,
        };
        let gyro_accel = match gyro {
            Some(g) => {
                check_aligned(phi, g)?;
                let w = cfg.window;
                valid_from = valid_from.max(w);
                if g.len() <= w {
                    return Err(Error::SequenceTooShort {
                        len: g.len(),
                        required: w + 1,
                    });
                }
                let denom = cfg.dt * w as f64;
                (0..g.len())
                    .map(|k| if k >= w { (g[k] - g[k - w]) / denom } else { 0.0 })
                    .collect()
            }
            None => vec![0.0; phi.len()],
        };
        let valid_to = match cfg.scheme {
            DiffScheme::Central => phi.len() - 1,
            DiffScheme::Backward => phi.len(),
        };
        Ok(Self {
            phi_dot,
            phi_ddot,
            gyro_accel,
            valid_from,
            valid_to,
        })
    }

    fn check_len(&self, n: usize) -> Result<()> {
        for len in [self.phi_dot.len(), self.phi_ddot.len(), self.gyro_accel.len()] {
            if len != n {
                return Err(Error::LengthMismatch { left: n, right: len });
            }
        }
        Ok(())
    }
}

fn check_aligned(a: &[f64], b: &[f64]) -> Result<()> {
    if a.len() != b.len() {
        return Err(Error::LengthMismatch {
            left: a.len(),
            right: b.len(),
        });
    }
    Ok(())
}

/// Shared estimator kernel:
/// `phi + asin(c[0]*phi_dot + c[1]*phi_ddot + c[2]*G_d) + lead*G`.
fn kernel(
    phi: &[f64],
    d: &Derivatives,
    c: [f64; 3],
    lead: Option<(f64, &[f64])>,
    clamp: ClampPolicy,
) -> Result<EstimateSeries> {
    let n = phi.len();
    d.check_len(n)?;
    if let Some((_, g)) = lead {
        check_aligned(phi, g)?;
    }
    let mut theta = vec![f64::NAN; n];
    let mut clamped = vec![false; n];
    let end = d.valid_to.min(n);
    for i in d.valid_from.min(end)..end {
        let arg = c[0] * d.phi_dot[i] + c[1] * d.phi_ddot[i] + c[2] * d.gyro_accel[i];
        let (a, flag) = clamped_asin(arg, clamp).map_err(|e| match e {
            Error::AsinOutOfRange { value, .. } => Error::AsinOutOfRange { index: i, value },
            other => other,
        })?;
        let mut est = phi[i] + a;
        if let Some((n_gain, g)) = lead {
            est += n_gain * g[i];
        }
        theta[i] = est;
        clamped[i] = flag;
    }
    Ok(EstimateSeries {
        theta,
        clamped,
        valid_from: d.valid_from,
        valid_to: d.valid_to.min(n),
    })
}

pub fn algo1_from_derivatives(
    phi: &[f64],
    d: &Derivatives,
    params: &Algo12Params,
    clamp: ClampPolicy,
) -> Result<EstimateSeries> {
    params.validate()?;
    kernel(phi, d, [params.kappa, params.iota, 0.0], None, clamp)
}

pub fn algo2_from_derivatives(
    phi: &[f64],
    d: &Derivatives,
    params: &Algo12Params,
    clamp: ClampPolicy,
) -> Result<EstimateSeries> {
    params.validate()?;
    kernel(phi, d, [params.kappa, params.iota, -params.iota], None, clamp)
}

pub fn algo3_from_derivatives(
    phi: &[f64],
    gyro: &[f64],
    d: &Derivatives,
    params: &Algo3Params,
    scale: f64,
    clamp: ClampPolicy,
) -> Result<EstimateSeries> {
    let c = [
        params.damping / scale,
        params.inertia / scale,
        params.gyro_accel / scale,
    ];
    kernel(phi, d, c, Some((params.rate_lead, gyro)), clamp)
}

/// Pendulum-only estimate, neglecting body angular acceleration.
pub fn estimate_algo1(
    phi: &[f64],
    params: &Algo12Params,
    cfg: &EstimatorConfig,
) -> Result<EstimateSeries> {
    let d = Derivatives::from_signals(phi, None, cfg)?;
    algo1_from_derivatives(phi, &d, params, cfg.clamp)
}

/// Pendulum estimate with the gyro derivative standing in for `theta_ddot`.
pub fn estimate_algo2(
    phi: &[f64],
    gyro: &[f64],
    params: &Algo12Params,
    cfg: &EstimatorConfig,
) -> Result<EstimateSeries> {
    let d = Derivatives::from_signals(phi, Some(gyro), cfg)?;
    algo2_from_derivatives(phi, &d, params, cfg.clamp)
}

/// Supervised estimate with free coefficients and rate feed-forward.
pub fn estimate_algo3(
    phi: &[f64],
    gyro: &[f64],
    params: &Algo3Params,
    cfg: &EstimatorConfig,
) -> Result<EstimateSeries> {
    let d = Derivatives::from_signals(phi, Some(gyro), cfg)?;
    algo3_from_derivatives(phi, gyro, &d, params, cfg.scale, cfg.clamp)
}

/// Dispatches on `algorithm` with a flat parameter vector laid out as in
/// [`Algorithm::param_labels`].
pub fn estimate_with_derivatives(
    algorithm: Algorithm,
    phi: &[f64],
    gyro: &[f64],
    d: &Derivatives,
    params: &[f64],
    cfg: &EstimatorConfig,
) -> Result<EstimateSeries> {
    match algorithm {
        Algorithm::Algo1 | Algorithm::Algo2 => {
            let [kappa, iota] = params else {
                return Err(invalid("params", format!("expected 2 values, got {}", params.len())));
            };
            let p = Algo12Params {
                kappa: *kappa,
                iota: *iota,
            };
            if algorithm == Algorithm::Algo1 {
                algo1_from_derivatives(phi, d, &p, cfg.clamp)
            } else {
                algo2_from_derivatives(phi, d, &p, cfg.clamp)
            }
        }
        Algorithm::Algo3 => {
            let p = Algo3Params::from_slice(params)?;
            algo3_from_derivatives(phi, gyro, d, &p, cfg.scale, cfg.clamp)
        }
    }
}

/// Sample-at-a-time estimator using backward differences over a short ring
/// buffer. Produces the same values as the batch functions run with
/// [`DiffScheme::Backward`].
#[derive(Debug, Clone)]
pub struct StreamingEstimator {
    algorithm: Algorithm,
    coeffs: [f64; 3],
    lead: f64,
    dt: f64,
    window: usize,
    clamp: ClampPolicy,
    phi_hist: VecDeque<f64>,
    gyro_hist: VecDeque<f64>,
    index: usize,
}

impl StreamingEstimator {
    pub fn new(algorithm: Algorithm, params: &[f64], cfg: &EstimatorConfig) -> Result<Self> {
        cfg.validate()?;
        let mut s = Self {
            algorithm,
            coeffs: [0.0; 3],
            lead: 0.0,
            dt: cfg.dt,
            window: cfg.window,
            clamp: cfg.clamp,
            phi_hist: VecDeque::with_capacity(3),
            gyro_hist: VecDeque::with_capacity(cfg.window + 1),
            index: 0,
        };
        s.set_params(params, cfg.scale)?;
        Ok(s)
    }

    /// Swaps in new parameters; history is kept.
    pub fn set_params(&mut self, params: &[f64], scale: f64) -> Result<()> {
        match self.algorithm {
            Algorithm::Algo1 | Algorithm::Algo2 => {
                let [kappa, iota] = params else {
                    return Err(invalid("params", "expected 2 values"));
                };
                Algo12Params::new(*kappa, *iota)?;
                let gyro = if self.algorithm == Algorithm::Algo2 { -iota } else { 0.0 };
                self.coeffs = [*kappa, *iota, gyro];
                self.lead = 0.0;
            }
            Algorithm::Algo3 => {
                let p = Algo3Params::from_slice(params)?;
                self.coeffs = [p.damping / scale, p.inertia / scale, p.gyro_accel / scale];
                self.lead = p.rate_lead;
            }
        }
        Ok(())
    }

    pub fn warmup(&self) -> usize {
        if self.algorithm.uses_gyro() {
            self.window.max(2)
        } else {
            2
        }
    }

    /// Feeds one sample; returns `(theta, clamped)` once enough history exists.
    pub fn push(&mut self, phi: f64, gyro: f64) -> Result<Option<(f64, bool)>> {
        if self.phi_hist.len() == 3 {
            self.phi_hist.pop_front();
        }
        self.phi_hist.push_back(phi);
        if self.gyro_hist.len() == self.window + 1 {
            self.gyro_hist.pop_front();
        }
        self.gyro_hist.push_back(gyro);
        let k = self.index;
        self.index += 1;
        if k < self.warmup() {
            return Ok(None);
        }
        let (p2, p1, p0) = (self.phi_hist[0], self.phi_hist[1], self.phi_hist[2]);
        let phi_dot = (p0 - p1) / self.dt;
        let phi_ddot = (p0 - 2.0 * p1 + p2) / (self.dt * self.dt);
        let gd = if self.algorithm.uses_gyro() {
            (gyro - self.gyro_hist[0]) / (self.dt * self.window as f64)
        } else {
            0.0
        };
        let c = self.coeffs;
        let arg = c[0] * phi_dot + c[1] * phi_ddot + c[2] * gd;
        let (a, flag) = clamped_asin(arg, self.clamp).map_err(|e| match e {
            Error::AsinOutOfRange { value, .. } => Error::AsinOutOfRange { index: k, value },
            other => other,
        })?;
        let mut est = phi + a;
        if self.algorithm == Algorithm::Algo3 {
            est += self.lead * gyro;
        }
        Ok(Some((est, flag)))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use std::f64::consts::{FRAC_PI_2, PI};

    #[test]
    fn clamped_asin_cases() {
        assert_eq!(clamped_asin(0.0, ClampPolicy::SaturateFlag).unwrap(), (0.0, false));
        let (a, f) = clamped_asin(0.5, ClampPolicy::SaturateFlag).unwrap();
        assert_relative_eq!(a, PI / 6.0, epsilon = 1e-15);
        assert!(!f);
        assert_eq!(clamped_asin(1.2, ClampPolicy::SaturateFlag).unwrap(), (FRAC_PI_2, true));
        assert_eq!(clamped_asin(-1.2, ClampPolicy::SaturateFlag).unwrap(), (-FRAC_PI_2, true));
        assert!(matches!(
            clamped_asin(1.2, ClampPolicy::Reject),
            Err(Error::AsinOutOfRange { .. })
        ));
        assert!(clamped_asin(f64::NAN, ClampPolicy::SaturateFlag).is_err());
    }

    #[test]
    fn constant_inputs_give_phi() {
        let phi = vec![0.3; 50];
        let gyro = vec![0.0; 50];
        let cfg = EstimatorConfig::offline(1e-3);
        let p = Algo12Params::from_pendulum(&PendulumParams::default());
        for est in [
            estimate_algo1(&phi, &p, &cfg).unwrap(),
            estimate_algo2(&phi, &gyro, &p, &cfg).unwrap(),
        ] {
            assert!(est.valid().iter().all(|t| *t == 0.3));
            assert!(est.theta[..est.valid_from].iter().all(|t| t.is_nan()));
        }
        let zero = Algo3Params::from_slice(&[0.0; 4]).unwrap();
        let est = estimate_algo3(&phi, &vec![0.7; 50], &zero, &cfg).unwrap();
        assert!(est.valid().iter().all(|t| *t == 0.3));
    }

    #[test]
    fn analytic_half_argument() {
        // kappa*phi_dot + iota*phi_ddot = 0.5 with phi = 0
        let d = Derivatives {
            phi_dot: vec![10.0],
            phi_ddot: vec![20.0],
            gyro_accel: vec![0.0],
            valid_from: 0,
            valid_to: 1,
        };
        let p = Algo12Params::new(0.03, 0.01).unwrap();
        let est = algo1_from_derivatives(&[0.0], &d, &p, ClampPolicy::SaturateFlag).unwrap();
        assert_relative_eq!(est.theta[0], PI / 6.0, epsilon = 1e-15);
    }

    #[test]
    fn algo3_reduces_to_algo2() {
        let pend = PendulumParams::default();
        let dt = 1e-3;
        let phi: Vec<f64> = (0..400).map(|i| 0.2 * (i as f64 * dt * 7.0).sin()).collect();
        let gyro: Vec<f64> = (0..400).map(|i| 1.4 * (i as f64 * dt * 7.0).cos()).collect();
        let cfg = EstimatorConfig::offline(dt).with_scale_from(&pend);
        let a2 = estimate_algo2(&phi, &gyro, &Algo12Params::from_pendulum(&pend), &cfg).unwrap();
        let a3 = estimate_algo3(&phi, &gyro, &Algo3Params::matching_algo2(&pend), &cfg).unwrap();
        assert_eq!(a2.valid_from, a3.valid_from);
        for (x, y) in a2.valid().iter().zip(a3.valid()) {
            assert_eq!(x, y);
        }
    }

    #[test]
    fn clamp_flags_are_counted() {
        let d = Derivatives {
            phi_dot: vec![0.0, 200.0, -200.0, 1.0],
            phi_ddot: vec![0.0; 4],
            gyro_accel: vec![0.0; 4],
            valid_from: 0,
            valid_to: 4,
        };
        let p = Algo12Params::new(0.01, 0.01).unwrap();
        let est = algo1_from_derivatives(&[0.0; 4], &d, &p, ClampPolicy::SaturateFlag).unwrap();
        assert_eq!(est.clamped, vec![false, true, true, false]);
        assert_eq!(est.clamp_count(), 2);
        let err = algo1_from_derivatives(&[0.0; 4], &d, &p, ClampPolicy::Reject).unwrap_err();
        assert!(matches!(err, Error::AsinOutOfRange { index: 1, .. }));
    }

    #[test]
    fn warmup_marks_unavailable() {
        let phi = vec![0.1; 20];
        let cfg = EstimatorConfig {
            window: 7,
            ..EstimatorConfig::live(0.01)
        };
        let p = Algo12Params::new(0.0, 0.01).unwrap();
        let est = estimate_algo2(&phi, &[0.0; 20], &p, &cfg).unwrap();
        assert_eq!(est.valid_from, 7);
        assert_eq!(est.get(6), None);
        assert_eq!(est.get(7), Some(0.1));
        assert!(estimate_algo2(&phi, &[0.0; 19], &p, &cfg).is_err());
    }

    #[test]
    fn streaming_matches_batch_backward() {
        let pend = PendulumParams::default();
        let dt = 1e-3;
        let cfg = EstimatorConfig::live(dt).with_scale_from(&pend);
        let phi: Vec<f64> = (0..300).map(|i| 0.1 * (i as f64 * dt * 5.0).sin()).collect();
        let gyro: Vec<f64> = (0..300).map(|i| 0.5 * (i as f64 * dt * 5.0).cos()).collect();
        for alg in [Algorithm::Algo1, Algorithm::Algo2, Algorithm::Algo3] {
            let mut params = alg.nominal_params(&pend);
            if alg == Algorithm::Algo3 {
                params[3] = 0.02;
            }
            let d = Derivatives::from_signals(&phi, alg.uses_gyro().then_some(&gyro[..]), &cfg)
                .unwrap();
            let batch = estimate_with_derivatives(alg, &phi, &gyro, &d, &params, &cfg).unwrap();
            let mut s = StreamingEstimator::new(alg, &params, &cfg).unwrap();
            for i in 0..phi.len() {
                let out = s.push(phi[i], gyro[i]).unwrap();
                match batch.get(i) {
                    Some(v) => assert_eq!(out.unwrap().0, v, "{alg:?} sample {i}"),
                    None => assert!(out.is_none()),
                }
            }
        }
    }
}
