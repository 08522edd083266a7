//! Scenario generation, estimation, fitting, filtering and plot-data
//! reporting on top of the `pendtilt` library.
//!
//! Each subcommand of the `pendtilt` binary is a function in [`commands`]
//! so that pipelines can also be driven from code and tests.

pub mod commands;
pub mod config;
pub mod error;
pub mod report;

pub use commands::{EstimateArgs, FitArgs, FitMode, KalmanArgs, Method, ReportArgs, SummaryRow};
pub use config::{Config, ScenarioSpec};
pub use error::{exit, CliError, Result};
pub use report::{FitFile, Provenance, RunReport};

/// `key = value` lines for a run report. Angles are shown in degrees when
/// `degrees` is set; files on disk always hold radians.
pub fn display_report(report: &RunReport, degrees: bool) -> Vec<String> {
    let (unit, scale) = if degrees { ("deg", 180.0 / std::f64::consts::PI) } else { ("rad", 1.0) };
    let mut out = Vec::new();
    if let Some(r) = report.measurement_variance {
        out.push(format!("measurement_variance_rad2 = {r}"));
    }
    for e in &report.estimators {
        let n = &e.name;
        out.push(format!("{n}.valid_from = {}", e.valid_from));
        out.push(format!("{n}.clamp_count = {}", e.clamp_count));
        if let Some(m) = &e.metrics {
            out.push(format!("{n}.rms_{unit} = {}", m.rms_rad * scale));
            out.push(format!("{n}.max_abs_{unit} = {}", m.max_abs_rad * scale));
            out.push(format!("{n}.delay_samples = {}", m.delay_samples));
            out.push(format!("{n}.delay_s = {}", m.delay_s));
            out.push(format!("{n}.overshoot_{unit} = {}", m.overshoot_rad * scale));
        }
    }
    out
}
