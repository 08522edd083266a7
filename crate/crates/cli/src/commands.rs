use std::collections::HashMap;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use nalgebra::Matrix2;
use serde::Deserialize;
use serde_json::value::RawValue;

use pendtilt::estimators::{estimate_with_derivatives, Derivatives};
use pendtilt::io::{read_log, read_table, write_columns, write_kalman_log, write_log};
use pendtilt::kalman::{calibrate_r, run_filter};
use pendtilt::metrics::evaluate;
use pendtilt::optim::fit_parameters;
use pendtilt::sensors::{apply_fir, synthesize_sensors};
use pendtilt::{
    simulate_pendulum, Algorithm, CostContext, CostKind, FirFilter, FirMode, KalmanModel, KalmanState,
    ParamVector, TimeSeries,
};

use crate::config::Config;
use crate::error::{CliError, Result};
use crate::report::{read_json, report_path, write_json, EstimatorEntry, FitFile, Provenance, RunReport};

/// Tilt sources a run can produce.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, clap::ValueEnum)]
pub enum Method {
    /// Pendulum angle passed through unchanged.
    Raw,
    /// Accelerometer gravity direction.
    Accel,
    Algo1,
    Algo2,
    Algo3,
}

impl Method {
    pub const ALL: [Method; 5] = [Method::Raw, Method::Accel, Method::Algo1, Method::Algo2, Method::Algo3];

    pub fn name(self) -> &'static str {
        match self {
            Method::Raw => "raw",
            Method::Accel => "accel",
            Method::Algo1 => "algo1",
            Method::Algo2 => "algo2",
            Method::Algo3 => "algo3",
        }
    }

    pub fn algorithm(self) -> Option<Algorithm> {
        match self {
            Method::Algo1 => Some(Algorithm::Algo1),
            Method::Algo2 => Some(Algorithm::Algo2),
            Method::Algo3 => Some(Algorithm::Algo3),
            Method::Raw | Method::Accel => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum FitMode {
    /// Fit against the logged true tilt.
    Offline,
    /// Fit against the gyro rate; needs no true tilt.
    Live,
}

struct Input {
    path: PathBuf,
    bytes: Vec<u8>,
    series: TimeSeries,
}

fn load_log(path: &Path) -> Result<Input> {
    let bytes = std::fs::read(path).map_err(CliError::io(path))?;
    let (series, _) = read_log(bytes.as_slice()).map_err(|source| CliError::Data {
        path: path.to_path_buf(),
        source,
    })?;
    Ok(Input {
        path: path.to_path_buf(),
        bytes,
        series,
    })
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(CliError::io(dir))?;
    }
    Ok(BufWriter::new(File::create(path).map_err(CliError::io(path))?))
}

fn finish(mut w: BufWriter<File>, path: &Path) -> Result<()> {
    w.flush().map_err(CliError::io(path))
}

/// Simulates the configured scenario and writes its sensor log.
pub fn simulate(cfg: &Config, out: &Path) -> Result<TimeSeries> {
    let s = &cfg.scenario;
    let phi0 = s.profile.angle(0.0) + s.initial_swing;
    let tr = simulate_pendulum(&s.pendulum, &s.profile, phi0, 0.0, s.dt, s.duration)?;
    let series = synthesize_sensors(&tr, &s.pendulum, &s.noise)?;
    let mut comments = vec![Provenance::new("simulate", cfg, None).comment()];
    comments.extend(cfg.canonical().lines().map(|l| format!("config: {l}")));
    let mut w = create(out)?;
    write_log(&mut w, &series, &comments)?;
    finish(w, out)?;
    Ok(series)
}

/// Estimator parameters: nominal values from the configured pendulum,
/// replaced by a fit result for the algorithm it was fitted for.
#[derive(Debug, Clone, Default)]
pub struct ParamSource {
    pub fitted: Option<FitFile>,
}

impl ParamSource {
    pub fn load(path: Option<&Path>) -> Result<Self> {
        Ok(Self {
            fitted: path.map(read_json::<FitFile>).transpose()?,
        })
    }

    pub fn for_algorithm(&self, a: Algorithm, cfg: &Config) -> Vec<f64> {
        match &self.fitted {
            Some(f) if f.fit.algorithm == Some(a) => f.fit.final_params.values.clone(),
            _ => a.nominal_params(&cfg.scenario.pendulum),
        }
    }
}

/// One estimate column with the index its valid range starts at.
#[derive(Debug, Clone, PartialEq)]
pub struct MethodOutput {
    pub theta: Vec<f64>,
    pub valid_from: usize,
    pub clamp_count: usize,
    pub params: Option<Vec<f64>>,
}

pub fn run_method(
    m: Method,
    series: &TimeSeries,
    cfg: &Config,
    params: &ParamSource,
    prefilter: Option<&FirFilter>,
) -> Result<MethodOutput> {
    let pre = |x: Vec<f64>| -> Result<Vec<f64>> {
        match prefilter {
            Some(f) => Ok(apply_fir(f, &x, FirMode::Causal)?.values),
            None => Ok(x),
        }
    };
    let skip = prefilter.map_or(0, |f| f.order);
    let mut out = match m.algorithm() {
        None => {
            let raw = if m == Method::Raw { series.phi() } else { series.accel_angles()? };
            MethodOutput {
                theta: pre(raw)?,
                valid_from: 0,
                clamp_count: 0,
                params: None,
            }
        }
        Some(a) => {
            let ecfg = cfg.estimator_config(series.dt);
            let phi = pre(series.phi())?;
            let gyro = pre(series.gyro())?;
            let d = Derivatives::from_signals(&phi, a.uses_gyro().then_some(gyro.as_slice()), &ecfg)?;
            let p = params.for_algorithm(a, cfg);
            let est = estimate_with_derivatives(a, &phi, &gyro, &d, &p, &ecfg)?;
            MethodOutput {
                clamp_count: est.clamp_count(),
                valid_from: est.valid_from,
                theta: est.theta,
                params: Some(p),
            }
        }
    };
    out.valid_from = out.valid_from.max(skip).min(out.theta.len());
    out.theta[..out.valid_from].fill(f64::NAN);
    Ok(out)
}

/// Per-row true tilt with NaN where the log leaves it empty, or `None`
/// when no row carries one.
fn truth_column(series: &TimeSeries) -> Option<Vec<f64>> {
    series
        .records
        .iter()
        .any(|r| r.theta_true.is_some())
        .then(|| series.records.iter().map(|r| r.theta_true.unwrap_or(f64::NAN)).collect())
}

fn entry(name: &str, out: &MethodOutput, truth: Option<&[f64]>, dt: f64) -> Result<EstimatorEntry> {
    let metrics = truth
        .map(|t| evaluate(&out.theta, t, out.valid_from, dt, out.clamp_count))
        .transpose()?;
    Ok(EstimatorEntry {
        name: name.to_string(),
        params: out.params.clone(),
        valid_from: out.valid_from,
        clamp_count: out.clamp_count,
        metrics,
    })
}

#[derive(Debug, Clone)]
pub struct EstimateArgs {
    pub input: PathBuf,
    /// Empty means every method.
    pub methods: Vec<Method>,
    pub params: Option<PathBuf>,
    pub prefilter: bool,
    pub out: PathBuf,
}

/// Runs the chosen estimators over a log; writes the estimate CSV and its
/// report next to it.
pub fn estimate(cfg: &Config, args: &EstimateArgs) -> Result<RunReport> {
    let input = load_log(&args.input)?;
    let series = &input.series;
    let params = ParamSource::load(args.params.as_deref())?;
    let fir = args.prefilter.then(|| cfg.fir_filter(series.dt)).transpose()?;
    let mut methods: Vec<Method> = Vec::new();
    for m in if args.methods.is_empty() { &Method::ALL[..] } else { &args.methods } {
        if !methods.contains(m) {
            methods.push(*m);
        }
    }
    let truth = truth_column(series);
    let prov = Provenance::new("estimate", cfg, Some(&input.bytes));

    let times = series.times();
    let mut names = vec!["t_s".to_string()];
    let mut columns: Vec<Vec<f64>> = Vec::new();
    if let Some(t) = &truth {
        names.push("theta_true_rad".into());
        columns.push(t.clone());
    }
    let mut entries = Vec::new();
    for m in methods {
        let out = run_method(m, series, cfg, &params, fir.as_ref())?;
        entries.push(entry(m.name(), &out, truth.as_deref(), series.dt)?);
        names.push(format!("theta_{}_rad", m.name()));
        columns.push(out.theta);
    }

    let mut w = create(&args.out)?;
    let names: Vec<&str> = names.iter().map(String::as_str).collect();
    let mut cols: Vec<&[f64]> = vec![&times];
    cols.extend(columns.iter().map(Vec::as_slice));
    write_columns(&mut w, &names, &cols, &[prov.comment()])?;
    finish(w, &args.out)?;

    let report = RunReport {
        provenance: prov,
        dt: series.dt,
        samples: series.len(),
        prefiltered: args.prefilter,
        measurement_variance: None,
        estimators: entries,
    };
    write_json(&report_path(&args.out), &report)?;
    Ok(report)
}

#[derive(Debug, Clone)]
pub struct FitArgs {
    pub input: PathBuf,
    pub mode: FitMode,
    pub algorithm: Algorithm,
    /// Starting point; nominal parameters of the configured pendulum if absent.
    pub p0: Option<Vec<f64>>,
    pub prefilter: bool,
    pub out: PathBuf,
}

/// Identifies estimator parameters by Newton iteration and writes the fit
/// report. Returns [`CliError::NotConverged`] after writing when the
/// iteration stopped short of its tolerance.
pub fn fit(cfg: &Config, args: &FitArgs) -> Result<FitFile> {
    let input = load_log(&args.input)?;
    let series = &input.series;
    let kind = match args.mode {
        FitMode::Offline => CostKind::OfflineTruth,
        FitMode::Live => CostKind::LiveGyro,
    };
    let fir = args.prefilter.then(|| cfg.fir_filter(series.dt)).transpose()?;
    let ecfg = cfg.estimator_config(series.dt);
    let ctx = CostContext::from_series(kind, args.algorithm, series, &ecfg, fir.as_ref()).map_err(|source| {
        CliError::Data {
            path: input.path.clone(),
            source,
        }
    })?;
    let start = args
        .p0
        .clone()
        .unwrap_or_else(|| args.algorithm.nominal_params(&cfg.scenario.pendulum));
    let p0 = ParamVector::for_algorithm(args.algorithm, start)?;
    let report = fit_parameters(&ctx, &p0, &cfg.newton)?;
    let file = FitFile {
        provenance: Provenance::new("fit", cfg, Some(&input.bytes)),
        fit: report,
    };
    write_json(&args.out, &file)?;
    if !file.fit.converged {
        return Err(CliError::NotConverged {
            iterations: file.fit.iterations,
            cost: file.fit.final_cost(),
        });
    }
    Ok(file)
}

#[derive(Debug, Clone)]
pub struct KalmanArgs {
    pub input: PathBuf,
    pub measurement: Method,
    pub params: Option<PathBuf>,
    /// Measurement variance; overrides the config and skips calibration.
    pub r: Option<f64>,
    pub prefilter: bool,
    pub out: PathBuf,
}

/// Fuses the gyro with the chosen angle measurement. Without an explicit
/// `r` the measurement variance is the sample variance of the measurement
/// over the first `kalman.calibration_s` seconds after warm-up.
pub fn kalman(cfg: &Config, args: &KalmanArgs) -> Result<RunReport> {
    if args.measurement == Method::Raw {
        return Err(CliError::Usage(
            "kalman measurement must be one of accel, algo1, algo2, algo3".into(),
        ));
    }
    let input = load_log(&args.input)?;
    let series = &input.series;
    let dt = series.dt;
    let params = ParamSource::load(args.params.as_deref())?;
    let fir = args.prefilter.then(|| cfg.fir_filter(dt)).transpose()?;
    let meas = run_method(args.measurement, series, cfg, &params, fir.as_ref())?;
    let from = meas.valid_from;
    let z: Vec<Option<f64>> = meas.theta.iter().map(|v| v.is_finite().then_some(*v)).collect();
    let k = &cfg.kalman;
    let r = match args.r.or(k.r) {
        Some(r) => r,
        None => {
            let len = (k.calibration_s / dt).round() as usize;
            calibrate_r(&meas.theta, from, len, 1e-12)?
        }
    };
    let mut model = KalmanModel::imu(dt, k.q_angle, k.q_bias, r)?;
    model.joseph = k.joseph;
    let theta0 = z.iter().flatten().next().copied().unwrap_or(0.0);
    let x0 = KalmanState::new(
        theta0,
        0.0,
        Matrix2::new(k.initial_angle_var, 0.0, 0.0, k.initial_bias_var),
    );
    let states = run_filter(&model, &x0, &series.gyro(), &z)?;

    let truth = truth_column(series);
    let filtered = MethodOutput {
        theta: states.iter().map(|s| s.theta()).collect(),
        valid_from: from,
        clamp_count: 0,
        params: None,
    };
    let entries = vec![
        entry("kf", &filtered, truth.as_deref(), dt)?,
        entry(args.measurement.name(), &meas, truth.as_deref(), dt)?,
    ];
    let prov = Provenance::new("kalman", cfg, Some(&input.bytes));
    let mut w = create(&args.out)?;
    write_kalman_log(&mut w, series, &states, &[prov.comment()])?;
    finish(w, &args.out)?;
    let report = RunReport {
        provenance: prov,
        dt,
        samples: series.len(),
        prefiltered: args.prefilter,
        measurement_variance: Some(r),
        estimators: entries,
    };
    write_json(&report_path(&args.out), &report)?;
    Ok(report)
}

/// Metric keys of the summary table, in column order.
pub const SUMMARY_KEYS: [&str; 7] = [
    "rms_rad",
    "max_abs_rad",
    "delay_samples",
    "delay_s",
    "overshoot_rad",
    "clamp_count",
    "valid_samples",
];

#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRow {
    pub run: String,
    pub estimator: String,
    /// Metric values as they appear in the run report, in [`SUMMARY_KEYS`] order.
    pub values: Vec<String>,
}

#[derive(Debug, Clone)]
pub struct ReportArgs {
    /// CSV outputs of `estimate` or `kalman`, each with its `.report.json`.
    pub runs: Vec<PathBuf>,
    pub out_dir: PathBuf,
    /// Smooth plotted angles with the zero-phase FIR. Runs whose inputs were
    /// prefiltered are never filtered twice.
    pub filter: bool,
}

#[derive(Deserialize)]
struct RawReport<'a> {
    #[serde(borrow)]
    estimators: Vec<RawEntry<'a>>,
}

#[derive(Deserialize)]
struct RawEntry<'a> {
    name: String,
    #[serde(borrow)]
    metrics: Option<HashMap<String, &'a RawValue>>,
}

/// Zero-phase smoothing of the finite stretch of `x`; NaN edges stay NaN.
/// Columns with interior gaps or too short to filter pass through.
fn smooth(f: &FirFilter, x: &[f64]) -> Vec<f64> {
    let (Some(lo), Some(hi)) = (x.iter().position(|v| v.is_finite()), x.iter().rposition(|v| v.is_finite())) else {
        return x.to_vec();
    };
    let span = &x[lo..=hi];
    if span.iter().any(|v| !v.is_finite()) {
        return x.to_vec();
    }
    match apply_fir(f, span, FirMode::ZeroPhase) {
        Ok(y) => {
            let mut out = x.to_vec();
            out[lo..=hi].copy_from_slice(&y.values);
            out
        }
        Err(_) => x.to_vec(),
    }
}

fn same_time_base(a: &[f64], b: &[f64]) -> bool {
    a.len() == b.len() && a.iter().zip(b).all(|(x, y)| (x - y).abs() <= 1e-9)
}

/// Writes `<run>_<estimator>_angle.csv` and, when the run has a true tilt,
/// `<run>_<estimator>_error.csv` for every estimate column, plus
/// `summary.csv` with the metric values copied verbatim from each report.
pub fn report(cfg: &Config, args: &ReportArgs) -> Result<Vec<SummaryRow>> {
    if args.runs.is_empty() {
        return Err(CliError::Usage("report needs at least one run output".into()));
    }
    std::fs::create_dir_all(&args.out_dir).map_err(CliError::io(&args.out_dir))?;
    let prov = Provenance::new("report", cfg, None);
    let mut comments = vec![prov.comment()];
    let mut base: Option<(&Path, Vec<f64>)> = None;
    let mut rows = Vec::new();

    for run in &args.runs {
        let bytes = std::fs::read(run).map_err(CliError::io(run))?;
        let data_err = |source| CliError::Data {
            path: run.clone(),
            source,
        };
        let table = read_table(bytes.as_slice()).map_err(data_err)?;
        let times = table
            .column("t_s")
            .ok_or(pendtilt::Error::MissingColumn("t_s"))
            .map_err(data_err)?
            .to_vec();
        match &base {
            Some((first, t)) if !same_time_base(t, &times) => {
                return Err(CliError::TimeBase {
                    first: first.to_path_buf(),
                    other: run.clone(),
                })
            }
            Some(_) => {}
            None => base = Some((run, times.clone())),
        }

        let rpath = report_path(run);
        let text = std::fs::read_to_string(&rpath).map_err(CliError::io(&rpath))?;
        let malformed = |e: serde_json::Error| CliError::Report {
            path: rpath.clone(),
            message: e.to_string(),
        };
        let parsed: RunReport = serde_json::from_str(&text).map_err(malformed)?;
        let raw: RawReport = serde_json::from_str(&text).map_err(malformed)?;
        comments.push(format!("run {}: {}", run.display(), parsed.provenance.comment()));

        let stem = run
            .file_stem()
            .and_then(|s| s.to_str())
            .ok_or_else(|| CliError::Usage(format!("{}: unusable file name", run.display())))?;
        let fir = cfg.fir_filter(parsed.dt)?;
        let filter = args.filter && !parsed.prefiltered;
        let truth = table
            .column("theta_true_rad")
            .filter(|t| t.iter().any(|v| v.is_finite()));
        for (h, col) in table.headers.iter().zip(&table.columns) {
            let Some(name) = h
                .strip_prefix("theta_")
                .and_then(|s| s.strip_suffix("_rad"))
                .filter(|n| *n != "true")
            else {
                continue;
            };
            let angle = if filter { smooth(&fir, col) } else { col.clone() };
            let file_comments = [prov.comment(), format!("source {} {}", run.display(), parsed.provenance.comment())];
            let path = args.out_dir.join(format!("{stem}_{name}_angle.csv"));
            let mut w = create(&path)?;
            write_columns(&mut w, &["t_s", "theta_rad"], &[&times, &angle], &file_comments)?;
            finish(w, &path)?;
            if let Some(t) = truth {
                let err: Vec<f64> = angle.iter().zip(t).map(|(a, b)| a - b).collect();
                let path = args.out_dir.join(format!("{stem}_{name}_error.csv"));
                let mut w = create(&path)?;
                write_columns(&mut w, &["t_s", "error_rad"], &[&times, &err], &file_comments)?;
                finish(w, &path)?;
            }
        }

        for e in raw.estimators {
            let Some(m) = e.metrics else { continue };
            let values = SUMMARY_KEYS
                .iter()
                .map(|k| {
                    m.get(*k).map(|v| v.get().to_string()).ok_or_else(|| CliError::Report {
                        path: rpath.clone(),
                        message: format!("estimator `{}` lacks `{k}`", e.name),
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            rows.push(SummaryRow {
                run: stem.to_string(),
                estimator: e.name,
                values,
            });
        }
    }

    let path = args.out_dir.join("summary.csv");
    let mut w = create(&path)?;
    let io = CliError::io(&path);
    let mut body = String::new();
    for c in &comments {
        body.push_str(&format!("# {c}\n"));
    }
    body.push_str(&format!("run,estimator,{}\n", SUMMARY_KEYS.join(",")));
    for r in &rows {
        body.push_str(&format!("{},{},{}\n", r.run, r.estimator, r.values.join(",")));
    }
    w.write_all(body.as_bytes()).map_err(io)?;
    finish(w, &path)?;
    Ok(rows)
}
