//! Finite-difference Newton identification of estimator parameters.
//!
//! ```text
//! P_n = P_{n-1} - h * H^{-1} g
//! ```
//!
//! `g` and `H` are forward-difference gradient and Hessian of a cost `F(P)`:
//! either the RMS error against a known tilt (offline) or the RMS error of the
//! estimate's derivative against the gyro (live).

use std::collections::VecDeque;
use std::sync::{Arc, RwLock};

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::estimators::{estimate_with_derivatives, Algorithm, Derivatives, EstimatorConfig};
use crate::sensors::{apply_fir, DiffScheme, FirFilter, FirMode, SampleRecord, TimeSeries};

/// Named parameter values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamVector {
    pub values: Vec<f64>,
    pub labels: Vec<String>,
}

impl ParamVector {
    pub fn new(values: Vec<f64>, labels: Vec<String>) -> Result<Self> {
        let p = Self { values, labels };
        p.validate()?;
        Ok(p)
    }

    /// Values labelled `p0, p1, ...`.
    pub fn unlabelled(values: Vec<f64>) -> Result<Self> {
        let labels = (0..values.len()).map(|i| format!("p{i}")).collect();
        Self::new(values, labels)
    }

    pub fn for_algorithm(algorithm: Algorithm, values: Vec<f64>) -> Result<Self> {
        let labels = algorithm.param_labels().iter().map(|s| s.to_string()).collect();
        Self::new(values, labels)
    }

    pub fn validate(&self) -> Result<()> {
        if self.values.is_empty() {
            return Err(invalid("params", "must hold at least one value"));
        }
        if self.labels.len() != self.values.len() {
            return Err(Error::LengthMismatch {
                left: self.values.len(),
                right: self.labels.len(),
            });
        }
        if self.values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("parameter vector"));
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn get(&self, label: &str) -> Option<f64> {
        self.labels
            .iter()
            .position(|l| l == label)
            .map(|i| self.values[i])
    }
}

/// Second-difference formula for the Hessian.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HessianStencil {
    /// `(F(P+dj+dk) - F(P+dj) - F(P+dk) + F(P)) / (sj sk)`.
    #[default]
    Standard,
    /// `(F(P+dj+dk) - F(P)) / (sj sk)`. Kept for comparison only; Newton
    /// does not converge with it even on quadratics.
    PaperLiteral,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NewtonConfig {
    /// Perturbation relative to each parameter's magnitude.
    pub delta_p: f64,
    /// Smallest absolute perturbation.
    pub delta_p_floor: f64,
    /// Step scale `h`.
    pub h: f64,
    pub max_iters: usize,
    /// Stop once the parameter step norm falls below this.
    pub tol: f64,
    /// Eigenvalue floor relative to `max|H_ij|`.
    pub hessian_regularization: f64,
    pub backtracking: bool,
    /// Backtracking gives up once the step scale drops below this.
    pub min_step: f64,
    pub stencil: HessianStencil,
}

impl Default for NewtonConfig {
    fn default() -> Self {
        Self {
            delta_p: 1e-6,
            delta_p_floor: 1e-9,
            h: 1.0,
            max_iters: 100,
            tol: 1e-8,
            hessian_regularization: 1e-8,
            backtracking: true,
            min_step: 1e-12,
            stencil: HessianStencil::Standard,
        }
    }
}

impl NewtonConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("delta_p", self.delta_p),
            ("delta_p_floor", self.delta_p_floor),
            ("h", self.h),
            ("tol", self.tol),
            ("min_step", self.min_step),
        ];
        for (name, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(invalid(name, format!("must be > 0, got {v}")));
            }
        }
        if !(self.hessian_regularization.is_finite() && self.hessian_regularization >= 0.0) {
            return Err(invalid("hessian_regularization", "must be >= 0"));
        }
        Ok(())
    }

    /// Per-component perturbations at `p`.
    pub fn steps(&self, p: &[f64]) -> Vec<f64> {
        p.iter()
            .map(|v| (self.delta_p * v.abs()).max(self.delta_p_floor))
            .collect()
    }
}

fn eval<F>(f: &F, p: &[f64]) -> Result<f64>
where
    F: Fn(&[f64]) -> Result<f64>,
{
    let v = f(p)?;
    if v.is_finite() {
        Ok(v)
    } else {
        Err(Error::NonFiniteCost { point: p.to_vec() })
    }
}

fn shifted(p: &[f64], moves: &[(usize, f64)]) -> Vec<f64> {
    let mut q = p.to_vec();
    for &(j, s) in moves {
        q[j] += s;
    }
    q
}

/// Forward-difference gradient with the same step `delta_p` on every axis.
pub fn fd_gradient<F>(f: &F, p: &[f64], delta_p: f64) -> Result<Vec<f64>>
where
    F: Fn(&[f64]) -> Result<f64>,
{
    if !(delta_p > 0.0) {
        return Err(invalid("delta_p", "must be > 0"));
    }
    let f0 = eval(f, p)?;
    fd_gradient_steps(f, p, f0, &vec![delta_p; p.len()])
}

/// Forward-difference gradient with per-axis steps, given `f0 = F(p)`.
pub fn fd_gradient_steps<F>(f: &F, p: &[f64], f0: f64, steps: &[f64]) -> Result<Vec<f64>>
where
    F: Fn(&[f64]) -> Result<f64>,
{
    (0..p.len())
        .map(|j| Ok((eval(f, &shifted(p, &[(j, steps[j])]))? - f0) / steps[j]))
        .collect()
}

/// Forward-difference Hessian with the same step on every axis, symmetrised.
pub fn fd_hessian<F>(f: &F, p: &[f64], delta_p: f64, stencil: HessianStencil) -> Result<DMatrix<f64>>
where
    F: Fn(&[f64]) -> Result<f64>,
{
    if !(delta_p > 0.0) {
        return Err(invalid("delta_p", "must be > 0"));
    }
    let f0 = eval(f, p)?;
    fd_hessian_steps(f, p, f0, &vec![delta_p; p.len()], stencil)
}

/// Forward-difference Hessian with per-axis steps, given `f0 = F(p)`.
pub fn fd_hessian_steps<F>(
    f: &F,
    p: &[f64],
    f0: f64,
    steps: &[f64],
    stencil: HessianStencil,
) -> Result<DMatrix<f64>>
where
    F: Fn(&[f64]) -> Result<f64>,
{
    let n = p.len();
    let single: Vec<f64> = match stencil {
        HessianStencil::Standard => (0..n)
            .map(|j| eval(f, &shifted(p, &[(j, steps[j])])))
            .collect::<Result<_>>()?,
        HessianStencil::PaperLiteral => vec![f0; n],
    };
    let mut h = DMatrix::zeros(n, n);
    for j in 0..n {
        for k in j..n {
            let fjk = eval(f, &shifted(p, &[(j, steps[j]), (k, steps[k])]))?;
            let v = match stencil {
                HessianStencil::Standard => fjk - single[j] - single[k] + f0,
                HessianStencil::PaperLiteral => fjk - f0,
            } / (steps[j] * steps[k]);
            h[(j, k)] = v;
            h[(k, j)] = v;
        }
    }
    Ok((&h + h.transpose()) * 0.5)
}

/// Replaces each eigenvalue by `max(|lambda|, floor)` with
/// `floor = reg * max|H_ij|` (or `reg` for an all-zero matrix), giving a
/// positive definite matrix. The floor scales with `H`, so multiplying the
/// cost by a constant leaves the Newton direction unchanged.
pub fn regularize_hessian(h: &DMatrix<f64>, reg: f64) -> Result<DMatrix<f64>> {
    if h.iter().any(|v| !v.is_finite()) {
        return Err(Error::SingularHessian);
    }
    let amax = h.amax();
    let floor = if amax > 0.0 { reg * amax } else { reg };
    let eig = h.clone().symmetric_eigen();
    let lambda = eig.eigenvalues.map(|l| l.abs().max(floor));
    if lambda.iter().any(|l| *l <= 0.0) {
        return Err(Error::SingularHessian);
    }
    let v = &eig.eigenvectors;
    Ok(v * DMatrix::from_diagonal(&lambda) * v.transpose())
}

fn newton_direction(h: &DMatrix<f64>, g: &[f64], reg: f64) -> Result<DVector<f64>> {
    let hr = regularize_hessian(h, reg)?;
    let dir = hr
        .cholesky()
        .ok_or(Error::SingularHessian)?
        .solve(&DVector::from_column_slice(g));
    if dir.iter().all(|v| v.is_finite()) {
        Ok(dir)
    } else {
        Err(Error::SingularHessian)
    }
}

/// Which reference the cost compares against.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CostKind {
    /// RMS of `theta_est - theta_true`.
    OfflineTruth,
    /// RMS of `d/dt theta_est - gyro`.
    LiveGyro,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitReport {
    pub final_params: ParamVector,
    /// Accepted Newton steps.
    pub iterations: usize,
    /// Cost at the start and after every accepted step.
    pub cost_trace: Vec<f64>,
    pub converged: bool,
    pub algorithm: Option<Algorithm>,
    pub cost_kind: Option<CostKind>,
}

impl FitReport {
    pub fn final_cost(&self) -> f64 {
        *self.cost_trace.last().unwrap_or(&f64::NAN)
    }
}

/// Minimises `f` from `p0`. See [`NewtonConfig`] for the knobs.
///
/// With backtracking, `h` is halved until the cost drops, then halved further
/// while that keeps lowering it. If every trial step shorter than `tol` fails
/// to lower the cost, the current point is reported as converged; if `h`
/// reaches `min_step` first, the report is returned with `converged = false`.
pub fn newton_iterate<F>(f: F, p0: &ParamVector, cfg: &NewtonConfig) -> Result<FitReport>
where
    F: Fn(&[f64]) -> Result<f64>,
{
    cfg.validate()?;
    p0.validate()?;
    let mut p = p0.values.clone();
    let mut fp = eval(&f, &p)?;
    let mut trace = vec![fp];
    let mut iterations = 0;
    let mut converged = false;

    let trial = |q: &[f64]| match f(q) {
        Ok(v) if v.is_finite() => v,
        _ => f64::INFINITY,
    };

    'outer: for _ in 0..cfg.max_iters {
        let steps = cfg.steps(&p);
        let g = fd_gradient_steps(&f, &p, fp, &steps)?;
        let h = fd_hessian_steps(&f, &p, fp, &steps, cfg.stencil)?;
        let dir = newton_direction(&h, &g, cfg.hessian_regularization)?;
        let dir_norm = dir.norm();
        let step_at = |scale: f64| -> Vec<f64> {
            p.iter().zip(dir.iter()).map(|(pi, di)| pi - scale * di).collect()
        };

        let (next, f_next, step_norm) = if cfg.backtracking {
            let mut scale = cfg.h;
            let mut q = step_at(scale);
            let mut fq = trial(&q);
            while !(fq < fp) {
                if scale * dir_norm < cfg.tol {
                    converged = true;
                    break 'outer;
                }
                scale *= 0.5;
                if scale < cfg.min_step {
                    break 'outer;
                }
                q = step_at(scale);
                fq = trial(&q);
            }
            loop {
                let half = step_at(scale * 0.5);
                let fh = trial(&half);
                if fh < fq {
                    scale *= 0.5;
                    q = half;
                    fq = fh;
                } else {
                    break;
                }
            }
            (q, fq, scale * dir_norm)
        } else {
            let q = step_at(cfg.h);
            let fq = eval(&f, &q)?;
            (q, fq, cfg.h * dir_norm)
        };

        p = next;
        fp = f_next;
        trace.push(fp);
        iterations += 1;
        if step_norm < cfg.tol {
            converged = true;
            break;
        }
    }

    Ok(FitReport {
        final_params: ParamVector {
            values: p,
            labels: p0.labels.clone(),
        },
        iterations,
        cost_trace: trace,
        converged,
        algorithm: None,
        cost_kind: None,
    })
}

/// Dataset, estimator and reference bound together for cost evaluation.
///
/// Derivatives are computed once; only the estimator coefficients vary
/// between evaluations.
#[derive(Debug, Clone)]
pub struct CostContext {
    pub kind: CostKind,
    pub algorithm: Algorithm,
    pub cfg: EstimatorConfig,
    phi: Vec<f64>,
    gyro: Vec<f64>,
    derivs: Derivatives,
    reference: Vec<f64>,
    skip: usize,
}

impl CostContext {
    /// Builds a context from raw signals. `reference` is the true tilt for
    /// [`CostKind::OfflineTruth`] and the gyro rate for [`CostKind::LiveGyro`].
    ///
    /// With a `prefilter`, `phi` and `gyro` pass through it causally before
    /// reaching the estimator, the reference stays unfiltered, and the
    /// filter's start-up transient is excluded from the cost.
    pub fn new(
        kind: CostKind,
        algorithm: Algorithm,
        phi: &[f64],
        gyro: &[f64],
        reference: &[f64],
        cfg: &EstimatorConfig,
        prefilter: Option<&FirFilter>,
    ) -> Result<Self> {
        cfg.validate()?;
        for other in [gyro.len(), reference.len()] {
            if other != phi.len() {
                return Err(Error::LengthMismatch {
                    left: phi.len(),
                    right: other,
                });
            }
        }
        let (phi, gyro, skip) = match prefilter {
            Some(fir) => (
                apply_fir(fir, phi, FirMode::Causal)?.values,
                apply_fir(fir, gyro, FirMode::Causal)?.values,
                fir.order,
            ),
            None => (phi.to_vec(), gyro.to_vec(), 0),
        };
        let d = Derivatives::from_signals(&phi, algorithm.uses_gyro().then_some(gyro.as_slice()), cfg)?;
        Ok(Self {
            kind,
            algorithm,
            cfg: *cfg,
            phi,
            gyro,
            derivs: d,
            reference: reference.to_vec(),
            skip,
        })
    }

    /// Context over a recorded series; offline needs `theta_true` on every row.
    pub fn from_series(
        kind: CostKind,
        algorithm: Algorithm,
        series: &TimeSeries,
        cfg: &EstimatorConfig,
        prefilter: Option<&FirFilter>,
    ) -> Result<Self> {
        let phi = series.phi();
        let gyro = series.gyro();
        let reference = match kind {
            CostKind::OfflineTruth => series.theta_true().ok_or(Error::MissingColumn("theta_true_rad"))?,
            CostKind::LiveGyro => gyro.clone(),
        };
        Self::new(kind, algorithm, &phi, &gyro, &reference, cfg, prefilter)
    }

    /// Replaces the estimator derivatives, e.g. with analytic ones.
    pub fn with_derivatives(mut self, d: Derivatives) -> Self {
        self.derivs = d;
        self
    }

    /// Also excludes the first `n` samples from the cost.
    pub fn skip_leading(mut self, n: usize) -> Self {
        self.skip = self.skip.max(n);
        self
    }

    pub fn len(&self) -> usize {
        self.phi.len()
    }

    pub fn is_empty(&self) -> bool {
        self.phi.is_empty()
    }

    /// Estimator output at `params`.
    pub fn estimate(&self, params: &[f64]) -> Result<Vec<f64>> {
        estimate_with_derivatives(self.algorithm, &self.phi, &self.gyro, &self.derivs, params, &self.cfg)
            .map(|e| e.theta)
    }

    /// Cost of the context's kind at `params`.
    pub fn cost(&self, params: &[f64]) -> Result<f64> {
        match self.kind {
            CostKind::OfflineTruth => rms_cost_offline(params, self),
            CostKind::LiveGyro => rms_cost_live(params, self),
        }
    }
}

fn rms(residuals: impl Iterator<Item = f64>) -> Result<f64> {
    let (sum, n) = residuals
        .filter(|r| !r.is_nan())
        .fold((0.0, 0usize), |(s, n), r| (s + r * r, n + 1));
    if n == 0 {
        return Err(Error::EmptyValidRange);
    }
    Ok((sum / n as f64).sqrt())
}

/// RMS difference between the estimate and the true tilt.
pub fn rms_cost_offline(params: &[f64], ctx: &CostContext) -> Result<f64> {
    if ctx.kind != CostKind::OfflineTruth {
        return Err(invalid("cost kind", "offline cost needs an offline context"));
    }
    let est = ctx.estimate(params)?;
    let from = ctx.skip.max(ctx.derivs.valid_from).min(est.len());
    rms((from..est.len()).map(|i| est[i] - ctx.reference[i]))
}

/// RMS difference between the estimate's discrete derivative and the gyro.
/// Constant offsets in the estimate do not change this cost.
pub fn rms_cost_live(params: &[f64], ctx: &CostContext) -> Result<f64> {
    if ctx.kind != CostKind::LiveGyro {
        return Err(invalid("cost kind", "live cost needs a live context"));
    }
    let est = ctx.estimate(params)?;
    let from = ctx.skip.max(ctx.derivs.valid_from);
    rate_residual_rms(&est, &ctx.reference, from, ctx.cfg.scheme, ctx.cfg.dt)
}

/// RMS of `d/dt est - rate` over samples from `from` on, where the
/// derivative uses `scheme` and only samples at or after `from`.
pub fn rate_residual_rms(est: &[f64], rate: &[f64], from: usize, scheme: DiffScheme, dt: f64) -> Result<f64> {
    if est.len() != rate.len() {
        return Err(Error::LengthMismatch {
            left: est.len(),
            right: rate.len(),
        });
    }
    let n = est.len();
    let from = from + 1;
    match scheme {
        DiffScheme::Central => {
            rms((from..n.saturating_sub(1)).map(|i| (est[i + 1] - est[i - 1]) / (2.0 * dt) - rate[i]))
        }
        DiffScheme::Backward => rms((from..n).map(|i| (est[i] - est[i - 1]) / dt - rate[i])),
    }
}

/// Runs Newton on the context's cost and tags the report.
pub fn fit_parameters(ctx: &CostContext, p0: &ParamVector, cfg: &NewtonConfig) -> Result<FitReport> {
    let expected = ctx.algorithm.param_labels().len();
    if p0.len() != expected {
        return Err(invalid(
            "params",
            format!("{} expects {expected} values, got {}", ctx.algorithm.name(), p0.len()),
        ));
    }
    let mut report = newton_iterate(|p: &[f64]| ctx.cost(p), p0, cfg)?;
    report.algorithm = Some(ctx.algorithm);
    report.cost_kind = Some(ctx.kind);
    Ok(report)
}

/// One published parameter set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Snapshot {
    /// Time of the last sample in the fitted window (s).
    pub t: f64,
    pub tick: usize,
    pub params: ParamVector,
    /// Live cost after the fit; `None` for the initial snapshot or a failure.
    pub cost: Option<f64>,
    pub converged: bool,
    /// Why this tick's fit was rejected; the parameters are then the
    /// previous snapshot's.
    pub failure: Option<String>,
}

/// Single-writer, many-reader slot holding the current snapshot. Readers get
/// a whole snapshot, never a partially updated one.
#[derive(Debug)]
pub struct SnapshotCell {
    inner: RwLock<Arc<Snapshot>>,
}

impl SnapshotCell {
    pub fn new(s: Snapshot) -> Self {
        Self {
            inner: RwLock::new(Arc::new(s)),
        }
    }

    pub fn load(&self) -> Arc<Snapshot> {
        match self.inner.read() {
            Ok(g) => Arc::clone(&g),
            Err(poisoned) => Arc::clone(&poisoned.into_inner()),
        }
    }

    pub fn publish(&self, s: Snapshot) {
        let s = Arc::new(s);
        match self.inner.write() {
            Ok(mut g) => *g = s,
            Err(poisoned) => *poisoned.into_inner() = s,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SupervisorConfig {
    pub algorithm: Algorithm,
    /// Seconds between fits.
    pub schedule_s: f64,
    /// Length of the fitted window (s).
    pub window_s: f64,
    pub newton: NewtonConfig,
    pub estimator: EstimatorConfig,
}

impl Default for SupervisorConfig {
    fn default() -> Self {
        Self {
            algorithm: Algorithm::Algo3,
            schedule_s: 0.5,
            window_s: 2.0,
            newton: NewtonConfig::default(),
            estimator: EstimatorConfig::offline(1e-3),
        }
    }
}

/// Periodically refits estimator parameters on the most recent window of a
/// stream, warm-starting from the last published set.
#[derive(Debug)]
pub struct LiveSupervisor {
    cfg: SupervisorConfig,
    prefilter: Option<FirFilter>,
    window_len: usize,
    schedule_len: usize,
    buffer: VecDeque<SampleRecord>,
    seen: usize,
    cell: Arc<SnapshotCell>,
    history: Vec<Snapshot>,
}

impl LiveSupervisor {
    pub fn new(p0: ParamVector, cfg: SupervisorConfig, prefilter: Option<FirFilter>) -> Result<Self> {
        cfg.newton.validate()?;
        cfg.estimator.validate()?;
        let dt = cfg.estimator.dt;
        let window_len = (cfg.window_s / dt).round() as usize;
        let schedule_len = (cfg.schedule_s / dt).round() as usize;
        if window_len < 10 {
            return Err(invalid("window_s", "must cover at least 10 samples"));
        }
        if schedule_len < 1 {
            return Err(invalid("schedule_s", "must be at least one sample period"));
        }
        if p0.len() != cfg.algorithm.param_labels().len() {
            return Err(invalid("params", "length does not match the algorithm"));
        }
        p0.validate()?;
        let initial = Snapshot {
            t: f64::NAN,
            tick: 0,
            params: p0,
            cost: None,
            converged: false,
            failure: None,
        };
        Ok(Self {
            cfg,
            prefilter,
            window_len,
            schedule_len,
            buffer: VecDeque::with_capacity(window_len),
            seen: 0,
            cell: Arc::new(SnapshotCell::new(initial.clone())),
            history: vec![initial],
        })
    }

    /// Shared handle for readers.
    pub fn cell(&self) -> Arc<SnapshotCell> {
        Arc::clone(&self.cell)
    }

    /// Every published snapshot, starting with the initial parameters.
    pub fn history(&self) -> &[Snapshot] {
        &self.history
    }

    pub fn current(&self) -> Arc<Snapshot> {
        self.cell.load()
    }

    /// Adds one sample; on a schedule tick with a full window, refits and
    /// returns the new snapshot.
    pub fn push(&mut self, record: SampleRecord) -> Option<&Snapshot> {
        if self.buffer.len() == self.window_len {
            self.buffer.pop_front();
        }
        self.buffer.push_back(record);
        self.seen += 1;
        if self.buffer.len() < self.window_len || !self.seen.is_multiple_of(self.schedule_len) {
            return None;
        }
        let previous = self.cell.load();
        let tick = previous.tick + 1;
        let t = record.t;
        let snapshot = match self.fit_window(&previous.params) {
            Ok(report) => Snapshot {
                t,
                tick,
                cost: Some(report.final_cost()),
                converged: report.converged,
                params: report.final_params,
                failure: None,
            },
            Err(e) => Snapshot {
                t,
                tick,
                params: previous.params.clone(),
                cost: None,
                converged: false,
                failure: Some(e.to_string()),
            },
        };
        self.cell.publish(snapshot.clone());
        self.history.push(snapshot);
        self.history.last()
    }

    fn fit_window(&self, start: &ParamVector) -> Result<FitReport> {
        let records: Vec<SampleRecord> = self.buffer.iter().copied().collect();
        if records
            .iter()
            .any(|r| !(r.phi.is_finite() && r.gyro.is_finite() && r.t.is_finite()))
        {
            return Err(Error::NonFinite("window sample"));
        }
        let series = TimeSeries::new(self.cfg.estimator.dt, records[0].t, records)?;
        let ctx = CostContext::from_series(
            CostKind::LiveGyro,
            self.cfg.algorithm,
            &series,
            &self.cfg.estimator,
            self.prefilter.as_ref(),
        )?;
        fit_parameters(&ctx, start, &self.cfg.newton)
    }
}

/// Feeds a whole series through a [`LiveSupervisor`] and returns its
/// snapshot history.
pub fn live_supervise(
    series: &TimeSeries,
    p0: ParamVector,
    cfg: SupervisorConfig,
    prefilter: Option<FirFilter>,
) -> Result<Vec<Snapshot>> {
    let mut sup = LiveSupervisor::new(p0, cfg, prefilter)?;
    for r in &series.records {
        sup.push(*r);
    }
    Ok(sup.history)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn pv(v: &[f64]) -> ParamVector {
        ParamVector::unlabelled(v.to_vec()).unwrap()
    }

    #[test]
    fn gradient_examples() {
        let c = |_: &[f64]| Ok(4.2);
        assert_eq!(fd_gradient(&c, &[1.0, 2.0], 1e-6).unwrap(), vec![0.0, 0.0]);
        let affine = |p: &[f64]| Ok(2.0 * p[0] + 3.0 * p[1]);
        let g = fd_gradient(&affine, &[0.5, -1.0], 0.25).unwrap();
        assert_eq!(g, vec![2.0, 3.0]);
        let sq = |p: &[f64]| Ok(p[0] * p[0]);
        let g = fd_gradient(&sq, &[3.0], 1e-6).unwrap();
        assert!((g[0] - 6.000001).abs() < 1e-8);
    }

    #[test]
    fn non_finite_cost_carries_point() {
        let bad = |p: &[f64]| Ok(if p[0] > 1.0 { f64::NAN } else { p[0] });
        match fd_gradient(&bad, &[1.0], 0.5) {
            Err(Error::NonFiniteCost { point }) => assert_eq!(point, vec![1.5]),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn hessian_examples() {
        let affine = |p: &[f64]| Ok(2.0 * p[0] - p[1] + 1.0);
        let h = fd_hessian(&affine, &[0.5, 0.25], 0.125, HessianStencil::Standard).unwrap();
        assert_eq!(h, DMatrix::zeros(2, 2));
        let bowl = |p: &[f64]| Ok(p[0] * p[0] + p[1] * p[1]);
        let h = fd_hessian(&bowl, &[1.0, -2.0], 0.125, HessianStencil::Standard).unwrap();
        assert_eq!(h, DMatrix::identity(2, 2) * 2.0);
        let saddle = |p: &[f64]| Ok(p[0] * p[1]);
        let h = fd_hessian(&saddle, &[3.0, 5.0], 0.25, HessianStencil::Standard).unwrap();
        assert_eq!(h, DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 1.0, 0.0]));
    }

    #[test]
    fn paper_literal_stencil_differs() {
        let bowl = |p: &[f64]| Ok(p[0] * p[0]);
        let h = fd_hessian(&bowl, &[3.0], 0.5, HessianStencil::PaperLiteral).unwrap();
        // (F(p + 2d) - F(p)) / d^2 = (16 - 9) / 0.25
        assert_eq!(h[(0, 0)], 28.0);
    }

    #[test]
    fn regularization_floors_eigenvalues() {
        let h = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, -1e-20]);
        let r = regularize_hessian(&h, 1e-8).unwrap();
        let eig = r.symmetric_eigen().eigenvalues;
        assert!(eig.min() >= 1e-8 * (1.0 - 1e-12));
        let nan = DMatrix::from_element(1, 1, f64::NAN);
        assert_eq!(regularize_hessian(&nan, 1e-8), Err(Error::SingularHessian));
    }

    #[test]
    fn newton_on_quadratic() {
        let f = |p: &[f64]| Ok((p[0] - 3.0) * (p[0] - 3.0));
        let cfg = NewtonConfig {
            backtracking: false,
            max_iters: 1,
            delta_p: 1e-3,
            delta_p_floor: 1e-3,
            ..NewtonConfig::default()
        };
        let r = newton_iterate(f, &pv(&[0.0]), &cfg).unwrap();
        // forward differences bias the step by delta_p / 2
        assert!((r.final_params.values[0] - 3.0).abs() < 2e-3);
        assert_eq!(r.iterations, 1);
    }

    #[test]
    fn newton_at_minimum_is_fixed_point() {
        let f = |p: &[f64]| Ok(((p[0] - 1.0).powi(2) + (p[1] + 2.0).powi(2)).sqrt());
        let r = newton_iterate(f, &pv(&[1.0, -2.0]), &NewtonConfig::default()).unwrap();
        assert!(r.converged);
        assert!(r.iterations <= 1);
        assert_eq!(r.final_params.values, vec![1.0, -2.0]);
    }

    #[test]
    fn newton_on_rms_like_cost() {
        let f = |p: &[f64]| Ok((4.0 * (p[0] - 0.3).powi(2) + (p[1] - 0.7).powi(2) + 0.1 * (p[0] - 0.3) * (p[1] - 0.7)).sqrt());
        let r = newton_iterate(f, &pv(&[1.0, 1.0]), &NewtonConfig::default()).unwrap();
        assert!(r.converged, "{r:?}");
        assert_relative_eq!(r.final_params.values[0], 0.3, epsilon = 1e-6);
        assert_relative_eq!(r.final_params.values[1], 0.7, epsilon = 1e-6);
        assert!(r.cost_trace.windows(2).all(|w| w[1] <= w[0]));
    }

    #[test]
    fn invalid_config_rejected() {
        let f = |p: &[f64]| Ok(p[0]);
        let cfg = NewtonConfig {
            h: 0.0,
            ..NewtonConfig::default()
        };
        assert!(newton_iterate(f, &pv(&[0.0]), &cfg).is_err());
    }

    #[test]
    fn snapshot_cell_swaps_whole_values() {
        let s = |v: f64| Snapshot {
            t: v,
            tick: 0,
            params: pv(&[v, v]),
            cost: None,
            converged: true,
            failure: None,
        };
        let cell = SnapshotCell::new(s(1.0));
        let first = cell.load();
        cell.publish(s(2.0));
        assert_eq!(first.params.values, vec![1.0, 1.0]);
        assert_eq!(cell.load().params.values, vec![2.0, 2.0]);
    }
}
