//! Tilt-angle estimation using a pendulum as an inertial sensor.
//!
//! The crate is organised the way the data flows:
//!
//! - [`dynamics`]: pendulum-on-tilting-body forward model, energies, tilt profiles.
//! - [`sensors`]: synthetic encoder/gyro/accelerometer signals, the accelerometer
//!   angle baseline, FIR conditioning and discrete derivative operators.
//! - [`estimators`]: the three pendulum-based tilt estimators.
//! - [`optim`]: finite-difference Newton identification and live supervision.
//! - [`kalman`]: the two-state `[angle; gyro bias]` linear Kalman filter.
//! - [`metrics`]: error, delay and overshoot measures used by reports.
//! - [`io`]: the CSV log schema.
//!
//! Angles are radians everywhere.

// `!(x > 0.0)` style checks are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod dynamics;
pub mod error;
pub mod estimators;
pub mod io;
pub mod kalman;
pub mod metrics;
pub mod optim;
pub mod sensors;

pub use dynamics::{
    simulate_pendulum, sigmoid_profile, BodyParams, PendulumParams, SimState, Simulator,
    TiltProfile, Trajectory,
};
pub use error::{Error, Result};
pub use estimators::{
    estimate_algo1, estimate_algo2, estimate_algo3, Algo12Params, Algo3Params, Algorithm,
    ClampPolicy, EstimateSeries, EstimatorConfig,
};
pub use kalman::{Gaussian1D, KalmanModel, KalmanState};
pub use optim::{
    CostContext, CostKind, FitReport, LiveSupervisor, NewtonConfig, ParamVector, Snapshot, SnapshotCell,
    SupervisorConfig,
};
pub use sensors::{DiffScheme, FirFilter, FirMode, NoiseSpec, SampleRecord, TimeSeries};
