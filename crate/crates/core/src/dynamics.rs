//! Forward model of a pendulum hinged on a tilting body.
//!
//! The body tilt `theta` (counter-clockwise positive) is prescribed by a
//! [`TiltProfile`]; the pendulum angle `phi` is measured relative to the body,
//! clockwise positive, so a pendulum hanging plumb reads `phi == theta`.
//! The pendulum obeys
//!
//! ```text
//! C*phi_dot + I_p*(phi_ddot - theta_ddot) + g*l_p*m_p*sin(phi - theta) = 0
//! ```
//!
//! which [`Simulator`] integrates with classical fixed-step RK4.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

/// Physical constants of the pendulum.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PendulumParams {
    /// Pendulum mass `m_p` (kg).
    pub mass: f64,
    /// Pivot-to-centre-of-gravity length `l_p` (m).
    pub length: f64,
    /// Moment of inertia about the pivot `I_p` (kg·m²).
    pub inertia: f64,
    /// Viscous damping at the pivot `C` (N·m·s/rad).
    pub damping: f64,
    /// Gravitational acceleration (m/s²).
    pub gravity: f64,
}

impl Default for PendulumParams {
    /// Point-mass desk pendulum: 50 g at 10 cm, natural frequency ~1.58 Hz.
    fn default() -> Self {
        Self {
            mass: 0.05,
            length: 0.1,
            inertia: 5e-4,
            damping: 1e-4,
            gravity: 9.81,
        }
    }
}

impl PendulumParams {
    pub fn validate(&self) -> Result<()> {
        positive("mass", self.mass)?;
        positive("length", self.length)?;
        positive("inertia", self.inertia)?;
        positive("gravity", self.gravity)?;
        if !self.damping.is_finite() || self.damping < 0.0 {
            return Err(invalid("damping", format!("must be >= 0, got {}", self.damping)));
        }
        Ok(())
    }

    /// Restoring torque scale `g * l_p * m_p` (N·m).
    pub fn restoring_scale(&self) -> f64 {
        self.gravity * self.length * self.mass
    }

    /// Small-oscillation angular frequency (rad/s) of the undamped pendulum.
    pub fn natural_frequency(&self) -> f64 {
        (self.restoring_scale() / self.inertia).sqrt()
    }

    /// Amplitude envelope time constant `2 I_p / C` (s); infinite when undamped.
    pub fn decay_time(&self) -> f64 {
        2.0 * self.inertia / self.damping
    }
}

/// Constants of the tilting body. Only the energy expressions use these.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BodyParams {
    /// Body mass `m_b` (kg).
    pub mass: f64,
    /// Body inertia about the main pivot `I_b` (kg·m²).
    pub inertia: f64,
    /// Main pivot to pendulum pivot distance `l_12` (m).
    pub pivot_distance: f64,
    /// Main pivot to body centre of gravity `l_bcg` (m).
    pub cg_distance: f64,
}

impl Default for BodyParams {
    fn default() -> Self {
        Self {
            mass: 1.0,
            inertia: 0.02,
            pivot_distance: 0.2,
            cg_distance: 0.1,
        }
    }
}

impl BodyParams {
    pub fn validate(&self) -> Result<()> {
        positive("body.mass", self.mass)?;
        positive("body.inertia", self.inertia)?;
        positive("body.pivot_distance", self.pivot_distance)?;
        positive("body.cg_distance", self.cg_distance)
    }
}

fn positive(name: &'static str, v: f64) -> Result<()> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(invalid(name, format!("must be finite and > 0, got {v}")))
    }
}

/// Body tilt, its rate and its acceleration at one instant.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TiltSample {
    pub angle: f64,
    pub rate: f64,
    pub accel: f64,
}

/// Prescribed body tilt trajectory `theta(t)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum TiltProfile {
    Constant {
        angle: f64,
    },
    /// `amplitude * S(rate * (t - center_time))` with the logistic `S`.
    Sigmoid {
        amplitude: f64,
        rate: f64,
        center_time: f64,
    },
    /// `(time, angle)` knots; held constant outside the knot range.
    PiecewiseLinear {
        knots: Vec<[f64; 2]>,
    },
    /// Uniformly sampled angles, interpolated with a cubic Hermite
    /// (Catmull-Rom) spline so that the rate is continuous.
    Sampled {
        start: f64,
        dt: f64,
        values: Vec<f64>,
    },
}

/// Logistic sigmoid `1 / (1 + e^-x)`.
pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Sigmoid tilt step of the given amplitude, centred at `center_time`.
pub fn sigmoid_profile(amplitude: f64, rate: f64, center_time: f64) -> Result<TiltProfile> {
    let p = TiltProfile::Sigmoid {
        amplitude,
        rate,
        center_time,
    };
    p.validate()?;
    Ok(p)
}

impl TiltProfile {
    /// Builds a sampled profile from timestamped angles, checking the
    /// timestamps are strictly increasing and uniform to 1e-9 s.
    pub fn from_samples(times: &[f64], values: &[f64]) -> Result<Self> {
        if times.len() != values.len() {
            return Err(Error::LengthMismatch {
                left: times.len(),
                right: values.len(),
            });
        }
        if times.len() < 2 {
            return Err(Error::SequenceTooShort {
                len: times.len(),
                required: 2,
            });
        }
        let start = times[0];
        let dt = (times[times.len() - 1] - start) / (times.len() - 1) as f64;
        if dt <= 0.0 {
            return Err(Error::NonUniformSampling { index: 1 });
        }
        for (i, &t) in times.iter().enumerate() {
            if (t - (start + i as f64 * dt)).abs() > 1e-9 {
                return Err(Error::NonUniformSampling { index: i });
            }
        }
        let p = TiltProfile::Sampled {
            start,
            dt,
            values: values.to_vec(),
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            TiltProfile::Constant { angle } => finite("profile.angle", *angle),
            TiltProfile::Sigmoid {
                amplitude,
                rate,
                center_time,
            } => {
                finite("profile.amplitude", *amplitude)?;
                finite("profile.center_time", *center_time)?;
                positive("profile.rate", *rate)
            }
            TiltProfile::PiecewiseLinear { knots } => {
                if knots.is_empty() {
                    return Err(invalid("profile.knots", "at least one knot required"));
                }
                for w in knots.windows(2) {
                    if !(w[1][0] > w[0][0]) {
                        return Err(invalid("profile.knots", "knot times must strictly increase"));
                    }
                }
                if knots.iter().flatten().any(|v| !v.is_finite()) {
                    return Err(Error::NonFinite("profile.knots"));
                }
                Ok(())
            }
            TiltProfile::Sampled { start, dt, values } => {
                finite("profile.start", *start)?;
                positive("profile.dt", *dt)?;
                if values.len() < 2 {
                    return Err(Error::SequenceTooShort {
                        len: values.len(),
                        required: 2,
                    });
                }
                if values.iter().any(|v| !v.is_finite()) {
                    return Err(Error::NonFinite("profile.values"));
                }
                Ok(())
            }
        }
    }

    pub fn angle(&self, t: f64) -> f64 {
        self.eval(t).angle
    }

    /// Tilt, rate and acceleration at time `t`. Rates are analytic for the
    /// constant and sigmoid kinds.
    pub fn eval(&self, t: f64) -> TiltSample {
        match self {
            TiltProfile::Constant { angle } => TiltSample {
                angle: *angle,
                rate: 0.0,
                accel: 0.0,
            },
            TiltProfile::Sigmoid {
                amplitude,
                rate,
                center_time,
            } => {
                let s = sigmoid(rate * (t - center_time));
                let ds = s * (1.0 - s);
                TiltSample {
                    angle: amplitude * s,
                    rate: amplitude * rate * ds,
                    accel: amplitude * rate * rate * ds * (1.0 - 2.0 * s),
                }
            }
            TiltProfile::PiecewiseLinear { knots } => piecewise_linear(knots, t),
            TiltProfile::Sampled { start, dt, values } => hermite(*start, *dt, values, t),
        }
    }
}

fn finite(name: &'static str, v: f64) -> Result<()> {
    if v.is_finite() {
        Ok(())
    } else {
        Err(invalid(name, format!("must be finite, got {v}")))
    }
}

fn piecewise_linear(knots: &[[f64; 2]], t: f64) -> TiltSample {
    let hold = |angle| TiltSample {
        angle,
        rate: 0.0,
        accel: 0.0,
    };
    let first = knots[0];
    let last = knots[knots.len() - 1];
    if t < first[0] {
        return hold(first[1]);
    }
    if t >= last[0] {
        return hold(last[1]);
    }
    // segment containing t, right-continuous at knots
    let i = knots.partition_point(|k| k[0] <= t) - 1;
    let [t0, a0] = knots[i];
    let [t1, a1] = knots[i + 1];
    let slope = (a1 - a0) / (t1 - t0);
    TiltSample {
        angle: a0 + slope * (t - t0),
        rate: slope,
        accel: 0.0,
    }
}

fn hermite(start: f64, dt: f64, v: &[f64], t: f64) -> TiltSample {
    let n = v.len();
    let x = (t - start) / dt;
    if x <= 0.0 {
        return TiltSample {
            angle: v[0],
            rate: 0.0,
            accel: 0.0,
        };
    }
    if x >= (n - 1) as f64 {
        return TiltSample {
            angle: v[n - 1],
            rate: 0.0,
            accel: 0.0,
        };
    }
    let i = (x.floor() as usize).min(n - 2);
    let u = x - i as f64;
    let slope = |k: usize| -> f64 {
        if k == 0 {
            (v[1] - v[0]) / dt
        } else if k == n - 1 {
            (v[n - 1] - v[n - 2]) / dt
        } else {
            (v[k + 1] - v[k - 1]) / (2.0 * dt)
        }
    };
    let (p0, p1) = (v[i], v[i + 1]);
    let (m0, m1) = (slope(i) * dt, slope(i + 1) * dt);
    let (u2, u3) = (u * u, u * u * u);
    let angle = (2.0 * u3 - 3.0 * u2 + 1.0) * p0
        + (u3 - 2.0 * u2 + u) * m0
        + (-2.0 * u3 + 3.0 * u2) * p1
        + (u3 - u2) * m1;
    let rate = ((6.0 * u2 - 6.0 * u) * p0
        + (3.0 * u2 - 4.0 * u + 1.0) * m0
        + (-6.0 * u2 + 6.0 * u) * p1
        + (3.0 * u2 - 2.0 * u) * m1)
        / dt;
    let accel = ((12.0 * u - 6.0) * p0
        + (6.0 * u - 4.0) * m0
        + (-12.0 * u + 6.0) * p1
        + (6.0 * u - 2.0) * m1)
        / (dt * dt);
    TiltSample { angle, rate, accel }
}

/// Instantaneous state of the pendulum and the body it hangs from.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct SimState {
    pub t: f64,
    /// Pendulum angle relative to the body, clockwise positive (rad).
    pub phi: f64,
    pub phi_dot: f64,
    /// Body tilt, counter-clockwise positive (rad).
    pub theta: f64,
    pub theta_dot: f64,
    pub theta_ddot: f64,
}

impl SimState {
    fn check_finite(&self) -> Result<()> {
        let all = [
            self.t,
            self.phi,
            self.phi_dot,
            self.theta,
            self.theta_dot,
            self.theta_ddot,
        ];
        if all.iter().all(|v| v.is_finite()) {
            Ok(())
        } else {
            Err(Error::NonFinite("SimState"))
        }
    }
}

/// Pendulum angular acceleration `phi_ddot` from the equation of motion.
pub fn pendulum_accel(state: &SimState, p: &PendulumParams) -> Result<f64> {
    state.check_finite()?;
    p.validate()?;
    Ok(state.theta_ddot
        - (p.damping * state.phi_dot + p.restoring_scale() * (state.phi - state.theta).sin())
            / p.inertia)
}

/// Kinetic energy of pendulum plus body.
///
/// The pendulum-mass term uses `l_12^2 * m_p / 2` so the expression has units
/// of energy.
pub fn kinetic_energy(state: &SimState, p: &PendulumParams, b: &BodyParams) -> f64 {
    let rel = -state.phi_dot + state.theta_dot;
    p.inertia * rel * rel / 2.0
        + (b.inertia / 2.0 + b.pivot_distance * b.pivot_distance * p.mass / 2.0)
            * state.theta_dot
            * state.theta_dot
}

/// Gravitational potential energy of pendulum plus body.
pub fn potential_energy(state: &SimState, p: &PendulumParams, b: &BodyParams) -> f64 {
    let g = p.gravity;
    g * b.cg_distance * b.mass * state.theta.cos()
        + g * p.mass
            * (b.pivot_distance * state.theta.cos() - p.length * (state.phi - state.theta).cos())
}

/// Energy of the pendulum alone, valid while the body is not rotating.
pub fn pendulum_energy(state: &SimState, p: &PendulumParams) -> f64 {
    0.5 * p.inertia * state.phi_dot * state.phi_dot
        - p.restoring_scale() * (state.phi - state.theta).cos()
}

/// Uniformly sampled simulation output.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub dt: f64,
    pub states: Vec<SimState>,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn phi(&self) -> Vec<f64> {
        self.states.iter().map(|s| s.phi).collect()
    }

    pub fn theta(&self) -> Vec<f64> {
        self.states.iter().map(|s| s.theta).collect()
    }

    pub fn times(&self) -> Vec<f64> {
        self.states.iter().map(|s| s.t).collect()
    }
}

/// Default bound on `|phi_dot|` beyond which a run is considered divergent.
pub const DEFAULT_DIVERGENCE_BOUND: f64 = 1e4;

/// Fixed-step RK4 integrator for the pendulum under a prescribed tilt.
///
/// The state is advanced in the body-relative deflection `e = phi - theta`,
/// for which the equation of motion reads
/// `I_p*e_ddot + C*(e_dot + theta_dot) + g*l_p*m_p*sin(e) = 0`. This is the
/// same equation as above but needs no `theta_ddot`, so kinked profiles are
/// integrated without losing the impulse at each corner.
#[derive(Debug, Clone)]
pub struct Simulator {
    params: PendulumParams,
    profile: TiltProfile,
    t0: f64,
    dt: f64,
    index: usize,
    deflection: f64,
    deflection_rate: f64,
    divergence_bound: f64,
}

impl Simulator {
    pub fn new(
        params: PendulumParams,
        profile: TiltProfile,
        t0: f64,
        phi0: f64,
        phi_dot0: f64,
        dt: f64,
    ) -> Result<Self> {
        params.validate()?;
        profile.validate()?;
        positive("dt", dt)?;
        finite("t0", t0)?;
        if !phi0.is_finite() || !phi_dot0.is_finite() {
            return Err(Error::NonFinite("initial pendulum state"));
        }
        let tilt = profile.eval(t0);
        Ok(Self {
            params,
            profile,
            t0,
            dt,
            index: 0,
            deflection: phi0 - tilt.angle,
            deflection_rate: phi_dot0 - tilt.rate,
            divergence_bound: DEFAULT_DIVERGENCE_BOUND,
        })
    }

    pub fn with_divergence_bound(mut self, bound: f64) -> Self {
        self.divergence_bound = bound;
        self
    }

    pub fn params(&self) -> &PendulumParams {
        &self.params
    }

    /// Replaces the pendulum constants from the next step on.
    pub fn set_params(&mut self, params: PendulumParams) -> Result<()> {
        params.validate()?;
        self.params = params;
        Ok(())
    }

    pub fn time(&self) -> f64 {
        self.t0 + self.index as f64 * self.dt
    }

    pub fn state(&self) -> SimState {
        let t = self.time();
        let tilt = self.profile.eval(t);
        SimState {
            t,
            phi: tilt.angle + self.deflection,
            phi_dot: tilt.rate + self.deflection_rate,
            theta: tilt.angle,
            theta_dot: tilt.rate,
            theta_ddot: tilt.accel,
        }
    }

    fn deflection_accel(&self, t: f64, e: f64, e_dot: f64) -> f64 {
        let theta_dot = self.profile.eval(t).rate;
        -(self.params.damping * (e_dot + theta_dot) + self.params.restoring_scale() * e.sin())
            / self.params.inertia
    }

    /// Advances one step and returns the new state.
    pub fn step(&mut self) -> Result<SimState> {
        let (t, h) = (self.time(), self.dt);
        let (e, v) = (self.deflection, self.deflection_rate);

        let k1e = v;
        let k1v = self.deflection_accel(t, e, v);
        let k2e = v + 0.5 * h * k1v;
        let k2v = self.deflection_accel(t + 0.5 * h, e + 0.5 * h * k1e, k2e);
        let k3e = v + 0.5 * h * k2v;
        let k3v = self.deflection_accel(t + 0.5 * h, e + 0.5 * h * k2e, k3e);
        let k4e = v + h * k3v;
        let k4v = self.deflection_accel(t + h, e + h * k3e, k4e);

        let e_next = e + h / 6.0 * (k1e + 2.0 * k2e + 2.0 * k3e + k4e);
        let v_next = v + h / 6.0 * (k1v + 2.0 * k2v + 2.0 * k3v + k4v);

        let next_t = self.t0 + (self.index + 1) as f64 * self.dt;
        let phi_dot = self.profile.eval(next_t).rate + v_next;
        if !e_next.is_finite() || !phi_dot.is_finite() || phi_dot.abs() > self.divergence_bound {
            return Err(Error::Diverged {
                last_valid: self.index,
                t: next_t,
                phi_dot,
            });
        }
        self.deflection = e_next;
        self.deflection_rate = v_next;
        self.index += 1;
        Ok(self.state())
    }

    /// Runs `steps` steps, returning the states visited (not including the
    /// current one).
    pub fn run(&mut self, steps: usize) -> Result<Vec<SimState>> {
        (0..steps).map(|_| self.step()).collect()
    }
}

/// Number of samples in `[0, duration]` at spacing `dt`.
pub fn sample_count(duration: f64, dt: f64) -> usize {
    (duration / dt + 1e-9).floor() as usize + 1
}

/// Simulates the pendulum from `t = 0` for `duration` seconds, sampled at `dt`.
pub fn simulate_pendulum(
    p: &PendulumParams,
    profile: &TiltProfile,
    phi0: f64,
    phi_dot0: f64,
    dt: f64,
    duration: f64,
) -> Result<Trajectory> {
    positive("dt", dt)?;
    if !(duration >= dt) {
        return Err(invalid("duration", format!("must be >= dt ({dt}), got {duration}")));
    }
    let mut sim = Simulator::new(*p, profile.clone(), 0.0, phi0, phi_dot0, dt)?;
    let n = sample_count(duration, dt);
    let mut states = Vec::with_capacity(n);
    states.push(sim.state());
    states.extend(sim.run(n - 1)?);
    Ok(Trajectory { dt, states })
}
