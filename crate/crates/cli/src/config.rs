//! TOML run configuration.
//!
//! Every section is optional and falls back to the defaults below; unknown
//! keys are rejected. A complete file looks like
//!
//! ```toml
//! [scenario]
//! duration = 10.0
//! dt = 0.001
//! seed = 1
//! initial_swing = 0.0
//!
//! [scenario.profile]
//! kind = "sigmoid"
//! amplitude = 0.5
//! rate = 8.0
//! center_time = 5.0
//!
//! [scenario.pendulum]
//! mass = 0.05
//! length = 0.1
//! inertia = 5e-4
//! damping = 1e-4
//! gravity = 9.81
//!
//! [scenario.noise]
//! gyro_white_std = 0.002
//! accel_white_std = 0.05
//! vibration_amp = 2.0
//! vibration_freqs = [37.0, 90.0, 180.0]
//!
//! [estimator]
//! window = 5
//! scheme = "central"
//! clamp = "saturate_flag"
//!
//! [fir]
//! order = 50
//! cutoff_hz = 20.0
//!
//! [newton]
//! max_iters = 100
//! tol = 1e-8
//!
//! [kalman]
//! q_angle = 1e-6
//! q_bias = 1e-8
//! calibration_s = 3.0
//! ```
//!
//! `scenario.seed` drives the noise generator; any `scenario.noise.seed`
//! is overwritten by it.

use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use pendtilt::dynamics::sample_count;
use pendtilt::sensors::design_fir;
use pendtilt::{
    sigmoid_profile, ClampPolicy, DiffScheme, EstimatorConfig, FirFilter, NewtonConfig, NoiseSpec,
    PendulumParams, TiltProfile,
};

use crate::error::{CliError, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioSpec {
    pub profile: TiltProfile,
    pub pendulum: PendulumParams,
    pub noise: NoiseSpec,
    /// Simulated time (s).
    pub duration: f64,
    /// Sample period (s).
    pub dt: f64,
    pub seed: u64,
    /// Initial pendulum deflection from plumb (rad).
    pub initial_swing: f64,
}

impl Default for ScenarioSpec {
    fn default() -> Self {
        Self {
            profile: sigmoid_profile(0.5, 8.0, 5.0).expect("valid default profile"),
            pendulum: PendulumParams::default(),
            noise: NoiseSpec::default(),
            duration: 10.0,
            dt: 1e-3,
            seed: 1,
            initial_swing: 0.0,
        }
    }
}

impl ScenarioSpec {
    pub fn validate(&self) -> Result<()> {
        let bad = |field: &str, msg: String| Err(CliError::Config(format!("scenario.{field}: {msg}")));
        if !(self.duration.is_finite() && self.duration > 0.0) {
            return bad("duration", format!("must be > 0, got {}", self.duration));
        }
        if !(self.dt.is_finite() && self.dt > 0.0) {
            return bad("dt", format!("must be > 0, got {}", self.dt));
        }
        if sample_count(self.duration, self.dt) < 3 {
            return bad("duration", "shorter than three samples".into());
        }
        if !self.initial_swing.is_finite() {
            return bad("initial_swing", "must be finite".into());
        }
        self.profile.validate().map_err(core_field("scenario"))?;
        self.pendulum.validate().map_err(core_field("scenario.pendulum"))?;
        self.noise.validate().map_err(core_field("scenario.noise"))?;
        Ok(())
    }
}

fn core_field(section: &'static str) -> impl Fn(pendtilt::Error) -> CliError {
    move |e| CliError::Config(format!("{section}: {e}"))
}

/// Estimator settings; `dt` comes from the log and the normaliser from
/// `scenario.pendulum`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EstimatorSection {
    pub window: usize,
    pub scheme: DiffScheme,
    pub clamp: ClampPolicy,
}

impl Default for EstimatorSection {
    fn default() -> Self {
        let e = EstimatorConfig::default();
        Self {
            window: e.window,
            scheme: e.scheme,
            clamp: e.clamp,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FirSection {
    pub order: usize,
    pub cutoff_hz: f64,
}

impl Default for FirSection {
    fn default() -> Self {
        Self {
            order: 50,
            cutoff_hz: 20.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct KalmanSection {
    pub q_angle: f64,
    pub q_bias: f64,
    /// Measurement variance (rad²). Calibrated from the data when absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub r: Option<f64>,
    /// Length of the segment, right after warm-up, used to calibrate `r` (s).
    pub calibration_s: f64,
    pub initial_angle_var: f64,
    pub initial_bias_var: f64,
    pub joseph: bool,
}

impl Default for KalmanSection {
    fn default() -> Self {
        Self {
            q_angle: 1e-6,
            q_bias: 1e-8,
            r: None,
            calibration_s: 3.0,
            initial_angle_var: 1.0,
            initial_bias_var: 1e-2,
            joseph: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    pub scenario: ScenarioSpec,
    pub estimator: EstimatorSection,
    pub fir: FirSection,
    pub newton: NewtonConfig,
    pub kalman: KalmanSection,
}

impl Config {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| CliError::Config(e.message().to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(CliError::io(path))?;
        Self::from_toml(&text)
    }

    /// Applies a seed override, propagates the scenario seed into the noise
    /// spec and validates every section.
    pub fn resolve(mut self, seed: Option<u64>) -> Result<Self> {
        if let Some(s) = seed {
            self.scenario.seed = s;
        }
        self.scenario.noise.seed = self.scenario.seed;
        self.scenario.validate()?;
        self.estimator_config(self.scenario.dt)
            .validate()
            .map_err(core_field("estimator"))?;
        self.newton.validate().map_err(core_field("newton"))?;
        for (name, v) in [
            ("q_angle", self.kalman.q_angle),
            ("q_bias", self.kalman.q_bias),
            ("initial_angle_var", self.kalman.initial_angle_var),
            ("initial_bias_var", self.kalman.initial_bias_var),
        ] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(CliError::Config(format!("kalman.{name}: must be >= 0, got {v}")));
            }
        }
        if let Some(r) = self.kalman.r {
            if !(r.is_finite() && r > 0.0) {
                return Err(CliError::Config(format!("kalman.r: must be > 0, got {r}")));
            }
        }
        if !(self.kalman.calibration_s.is_finite() && self.kalman.calibration_s > 0.0) {
            return Err(CliError::Config("kalman.calibration_s: must be > 0".into()));
        }
        design_fir(self.fir.order, self.fir.cutoff_hz, 1.0 / self.scenario.dt).map_err(core_field("fir"))?;
        Ok(self)
    }

    /// Canonical TOML of the resolved configuration.
    pub fn canonical(&self) -> String {
        toml::to_string(self).expect("config serialises")
    }

    /// SHA-256 of [`Config::canonical`], hex encoded.
    pub fn hash(&self) -> String {
        hex::encode(Sha256::digest(self.canonical().as_bytes()))
    }

    pub fn estimator_config(&self, dt: f64) -> EstimatorConfig {
        EstimatorConfig {
            dt,
            window: self.estimator.window,
            scheme: self.estimator.scheme,
            clamp: self.estimator.clamp,
            scale: self.scenario.pendulum.restoring_scale(),
        }
    }

    pub fn fir_filter(&self, dt: f64) -> Result<FirFilter> {
        Ok(design_fir(self.fir.order, self.fir.cutoff_hz, 1.0 / dt)?)
    }
}
