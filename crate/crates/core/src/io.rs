//! CSV log schema.
//!
//! ```text
//! t_s,theta_true_rad,phi_rad,gyro_rad_s,ax_ms2,ay_ms2
//! ```
//!
//! The header row is mandatory; `theta_true_rad` may be empty per row.
//! Lines starting with `#` before the header carry provenance and are
//! skipped on read. Output uses `.` decimals, UTF-8 and LF endings.

use std::io::{Read, Write};

use crate::error::{Error, Result};
use crate::kalman::KalmanState;
use crate::sensors::{SampleRecord, TimeSeries};

pub const LOG_COLUMNS: [&str; 6] = [
    "t_s",
    "theta_true_rad",
    "phi_rad",
    "gyro_rad_s",
    "ax_ms2",
    "ay_ms2",
];

pub const KALMAN_COLUMNS: [&str; 5] = ["theta_kf_rad", "b_kf_rad_s", "p00", "p01", "p11"];

/// Shortest round-trip decimal for `v`; NaN becomes an empty field.
pub fn fmt_f64(v: f64) -> String {
    if v.is_nan() {
        String::new()
    } else if v.is_finite() {
        let mut buf = ryu::Buffer::new();
        let s = buf.format_finite(v);
        s.strip_suffix(".0").unwrap_or(s).to_string()
    } else if v > 0.0 {
        "inf".into()
    } else {
        "-inf".into()
    }
}

fn write_comments<W: Write>(w: &mut W, comments: &[String]) -> Result<()> {
    for c in comments {
        for line in c.lines() {
            writeln!(w, "# {line}")?;
        }
    }
    Ok(())
}

fn record_fields(r: &SampleRecord) -> [String; 6] {
    [
        fmt_f64(r.t),
        r.theta_true.map(fmt_f64).unwrap_or_default(),
        fmt_f64(r.phi),
        fmt_f64(r.gyro),
        fmt_f64(r.ax),
        fmt_f64(r.ay),
    ]
}

/// Writes a sensor log, preceded by `# `-prefixed comment lines.
pub fn write_log<W: Write>(mut w: W, series: &TimeSeries, comments: &[String]) -> Result<()> {
    write_comments(&mut w, comments)?;
    writeln!(w, "{}", LOG_COLUMNS.join(","))?;
    for r in &series.records {
        writeln!(w, "{}", record_fields(r).join(","))?;
    }
    Ok(())
}

/// Writes a sensor log extended with Kalman posterior columns.
pub fn write_kalman_log<W: Write>(
    mut w: W,
    series: &TimeSeries,
    states: &[KalmanState],
    comments: &[String],
) -> Result<()> {
    if states.len() != series.len() {
        return Err(Error::LengthMismatch {
            left: series.len(),
            right: states.len(),
        });
    }
    write_comments(&mut w, comments)?;
    writeln!(w, "{},{}", LOG_COLUMNS.join(","), KALMAN_COLUMNS.join(","))?;
    for (r, s) in series.records.iter().zip(states) {
        let extra = [s.x[0], s.x[1], s.p[(0, 0)], s.p[(0, 1)], s.p[(1, 1)]].map(fmt_f64);
        writeln!(w, "{},{}", record_fields(r).join(","), extra.join(","))?;
    }
    Ok(())
}

/// Writes named columns next to a time column, e.g. estimator outputs.
pub fn write_columns<W: Write>(
    mut w: W,
    names: &[&str],
    columns: &[&[f64]],
    comments: &[String],
) -> Result<()> {
    let n = columns.first().map_or(0, |c| c.len());
    if let Some(c) = columns.iter().find(|c| c.len() != n) {
        return Err(Error::LengthMismatch {
            left: n,
            right: c.len(),
        });
    }
    write_comments(&mut w, comments)?;
    writeln!(w, "{}", names.join(","))?;
    for i in 0..n {
        let row: Vec<String> = columns.iter().map(|c| fmt_f64(c[i])).collect();
        writeln!(w, "{}", row.join(","))?;
    }
    Ok(())
}

/// A parsed CSV table with the comment lines that preceded its header.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub comments: Vec<String>,
    pub headers: Vec<String>,
    /// Column-major values; empty cells are NaN.
    pub columns: Vec<Vec<f64>>,
}

impl Table {
    pub fn column(&self, name: &str) -> Option<&[f64]> {
        self.headers
            .iter()
            .position(|h| h == name)
            .map(|i| self.columns[i].as_slice())
    }

    pub fn rows(&self) -> usize {
        self.columns.first().map_or(0, |c| c.len())
    }
}

fn split_comments(text: &str) -> (Vec<String>, &str) {
    let mut comments = Vec::new();
    let mut rest = text;
    while let Some(line) = rest.strip_prefix('#') {
        let (l, tail) = line.split_once('\n').unwrap_or((line, ""));
        comments.push(l.trim_start_matches(' ').trim_end_matches('\r').to_string());
        rest = tail;
    }
    (comments, rest)
}

/// Parses any numeric CSV table with a header row.
pub fn read_table<R: Read>(mut r: R) -> Result<Table> {
    let mut text = String::new();
    r.read_to_string(&mut text)?;
    let (comments, body) = split_comments(&text);
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .comment(Some(b'#'))
        .from_reader(body.as_bytes());
    let headers: Vec<String> = rdr
        .headers()
        .map_err(|e| Error::Schema {
            row: 0,
            column: String::new(),
            message: e.to_string(),
        })?
        .iter()
        .map(|h| h.trim().to_string())
        .collect();
    if headers.iter().all(|h| h.is_empty()) {
        return Err(Error::Schema {
            row: 0,
            column: String::new(),
            message: "missing header row".into(),
        });
    }
    let mut columns = vec![Vec::new(); headers.len()];
    for (i, rec) in rdr.records().enumerate() {
        let row = i + 1;
        let rec = rec.map_err(|e| Error::Schema {
            row,
            column: String::new(),
            message: e.to_string(),
        })?;
        if rec.len() != headers.len() {
            return Err(Error::Schema {
                row,
                column: String::new(),
                message: format!("expected {} fields, found {}", headers.len(), rec.len()),
            });
        }
        for (j, field) in rec.iter().enumerate() {
            let field = field.trim();
            let v = if field.is_empty() {
                f64::NAN
            } else {
                field.parse::<f64>().map_err(|_| Error::Schema {
                    row,
                    column: headers[j].clone(),
                    message: format!("`{field}` is not a number"),
                })?
            };
            columns[j].push(v);
        }
    }
    Ok(Table {
        comments,
        headers,
        columns,
    })
}

/// Reads a sensor log. Extra columns are ignored; the six log columns are
/// required, and every field except `theta_true_rad` must be non-empty.
pub fn read_log<R: Read>(r: R) -> Result<(TimeSeries, Vec<String>)> {
    let table = read_table(r)?;
    let mut cols = Vec::with_capacity(6);
    for name in LOG_COLUMNS {
        cols.push(table.column(name).ok_or(Error::MissingColumn(name))?);
    }
    let n = table.rows();
    let mut records = Vec::with_capacity(n);
    for i in 0..n {
        for (c, name) in cols.iter().zip(LOG_COLUMNS) {
            if name != "theta_true_rad" && !c[i].is_finite() {
                return Err(Error::Schema {
                    row: i + 1,
                    column: name.to_string(),
                    message: "value required".into(),
                });
            }
        }
        let theta = cols[1][i];
        records.push(SampleRecord {
            t: cols[0][i],
            theta_true: theta.is_finite().then_some(theta),
            phi: cols[2][i],
            gyro: cols[3][i],
            ax: cols[4][i],
            ay: cols[5][i],
        });
    }
    let series = TimeSeries::from_records(records).map_err(|e| match e {
        Error::NonUniformSampling { index } => Error::Schema {
            row: index + 1,
            column: "t_s".into(),
            message: "timestamps are not uniformly spaced".into(),
        },
        other => other,
    })?;
    Ok((series, table.comments))
}
