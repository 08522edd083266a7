//! Accuracy measures for tilt estimates against a reference.
//!
//! Every function skips samples before `from` and samples whose estimate is
//! NaN (estimator warm-up).

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

fn pairs<'a>(
    est: &'a [f64],
    truth: &'a [f64],
    from: usize,
) -> Result<impl Iterator<Item = (usize, f64, f64)> + 'a> {
    if est.len() != truth.len() {
        return Err(Error::LengthMismatch {
            left: est.len(),
            right: truth.len(),
        });
    }
    Ok((from.min(est.len())..est.len())
        .map(move |i| (i, est[i], truth[i]))
        .filter(|(_, e, t)| e.is_finite() && t.is_finite()))
}

pub fn rms_error(est: &[f64], truth: &[f64], from: usize) -> Result<f64> {
    let (sum, n) = pairs(est, truth, from)?
        .fold((0.0, 0usize), |(s, n), (_, e, t)| (s + (e - t) * (e - t), n + 1));
    if n == 0 {
        return Err(Error::EmptyValidRange);
    }
    Ok((sum / n as f64).sqrt())
}

pub fn max_abs_error(est: &[f64], truth: &[f64], from: usize) -> Result<f64> {
    pairs(est, truth, from)?
        .map(|(_, e, t)| (e - t).abs())
        .reduce(f64::max)
        .ok_or(Error::EmptyValidRange)
}

/// Lag (samples) maximising the Pearson correlation between `est[k]` and
/// `truth[k - lag]` for `|lag| <= max_lag`. Positive means the estimate lags
/// the reference. Ties resolve to the smallest `|lag|`.
pub fn delay_samples(est: &[f64], truth: &[f64], from: usize, max_lag: usize) -> Result<i64> {
    if est.len() != truth.len() {
        return Err(Error::LengthMismatch {
            left: est.len(),
            right: truth.len(),
        });
    }
    let n = est.len() as i64;
    let from = from as i64;
    let max_lag = max_lag as i64;
    let mut best: Option<(f64, i64)> = None;
    let mut lags: Vec<i64> = (-max_lag..=max_lag).collect();
    lags.sort_by_key(|l| (l.abs(), *l));
    for lag in lags {
        let lo = from.max(from + lag);
        let hi = n.min(n + lag);
        let (mut sx, mut sy, mut sxx, mut syy, mut sxy, mut m) = (0.0, 0.0, 0.0, 0.0, 0.0, 0.0);
        for k in lo..hi {
            let x = est[k as usize];
            let y = truth[(k - lag) as usize];
            if !(x.is_finite() && y.is_finite()) {
                continue;
            }
            sx += x;
            sy += y;
            sxx += x * x;
            syy += y * y;
            sxy += x * y;
            m += 1.0;
        }
        if m < 2.0 {
            continue;
        }
        let cov = sxy - sx * sy / m;
        let vx = sxx - sx * sx / m;
        let vy = syy - sy * sy / m;
        if vx <= 0.0 || vy <= 0.0 {
            continue;
        }
        let r = cov / (vx * vy).sqrt();
        if best.is_none_or(|(br, _)| r > br) {
            best = Some((r, lag));
        }
    }
    // a flat reference has no defined delay; report zero
    Ok(best.map_or(0, |(_, lag)| lag))
}

/// Peak excess of the estimate beyond the reference's peak, measured from
/// the first sample where the reference passes the midpoint of its overall
/// excursion. The sign follows the direction of the transition, so a
/// downward step overshooting below its floor also counts as positive.
pub fn overshoot(est: &[f64], truth: &[f64], from: usize) -> Result<f64> {
    let valid: Vec<(usize, f64, f64)> = pairs(est, truth, from)?.collect();
    let (first, last) = match (valid.first(), valid.last()) {
        (Some(f), Some(l)) => (f.2, l.2),
        _ => return Err(Error::EmptyValidRange),
    };
    let dir = if last >= first { 1.0 } else { -1.0 };
    let mid = 0.5 * (first + last);
    let start = valid
        .iter()
        .position(|(_, _, t)| dir * (t - mid) >= 0.0)
        .unwrap_or(0);
    let window = &valid[start..];
    let peak_est = window
        .iter()
        .map(|(_, e, _)| dir * e)
        .fold(f64::NEG_INFINITY, f64::max);
    let peak_true = window
        .iter()
        .map(|(_, _, t)| dir * t)
        .fold(f64::NEG_INFINITY, f64::max);
    Ok(peak_est - peak_true)
}

/// Summary of one estimator's accuracy.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorMetrics {
    pub rms_rad: f64,
    pub max_abs_rad: f64,
    pub delay_samples: i64,
    pub delay_s: f64,
    pub overshoot_rad: f64,
    pub clamp_count: usize,
    pub valid_samples: usize,
}

/// Delay search half-width used by reports (s).
pub const DELAY_SEARCH_S: f64 = 0.5;

pub fn evaluate(
    est: &[f64],
    truth: &[f64],
    from: usize,
    dt: f64,
    clamp_count: usize,
) -> Result<ErrorMetrics> {
    let max_lag = (DELAY_SEARCH_S / dt).round() as usize;
    let delay = delay_samples(est, truth, from, max_lag)?;
    Ok(ErrorMetrics {
        rms_rad: rms_error(est, truth, from)?,
        max_abs_rad: max_abs_error(est, truth, from)?,
        delay_samples: delay,
        delay_s: delay as f64 * dt,
        overshoot_rad: overshoot(est, truth, from)?,
        clamp_count,
        valid_samples: pairs(est, truth, from)?.count(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::sigmoid;

    #[test]
    fn rms_of_constant_offset() {
        let t = vec![0.1, 0.2, 0.3, 0.4];
        let e: Vec<f64> = t.iter().map(|x| x - 0.05).collect();
        assert!((rms_error(&e, &t, 0).unwrap() - 0.05).abs() < 1e-15);
        assert!((max_abs_error(&e, &t, 0).unwrap() - 0.05).abs() < 1e-15);
        assert_eq!(rms_error(&e, &t, 4), Err(Error::EmptyValidRange));
    }

    #[test]
    fn nan_samples_skipped() {
        let t = vec![1.0, 1.0, 1.0];
        let e = vec![f64::NAN, 1.0, 2.0];
        assert!((rms_error(&e, &t, 0).unwrap() - (0.5f64).sqrt()).abs() < 1e-15);
    }

    #[test]
    fn delay_of_shifted_sigmoid() {
        let truth: Vec<f64> = (0..2000).map(|i| sigmoid((i as f64 - 1000.0) * 0.01)).collect();
        for shift in [-30i64, 0, 25] {
            let est: Vec<f64> = (0..2000i64)
                .map(|i| sigmoid(((i - shift) as f64 - 1000.0) * 0.01))
                .collect();
            assert_eq!(delay_samples(&est, &truth, 0, 100).unwrap(), shift);
        }
    }

    #[test]
    fn overshoot_sign_follows_direction() {
        let truth: Vec<f64> = (0..100).map(|i| if i < 50 { 0.0 } else { 1.0 }).collect();
        let mut est = truth.clone();
        est[60] = 1.2;
        assert!((overshoot(&est, &truth, 0).unwrap() - 0.2).abs() < 1e-12);
        let down: Vec<f64> = truth.iter().map(|x| -x).collect();
        let est_down: Vec<f64> = est.iter().map(|x| -x).collect();
        assert!((overshoot(&est_down, &down, 0).unwrap() - 0.2).abs() < 1e-12);
    }
}
