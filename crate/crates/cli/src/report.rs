//! Run reports and the provenance stamped on every output file.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use pendtilt::metrics::ErrorMetrics;
use pendtilt::FitReport;

use crate::config::Config;
use crate::error::{CliError, Result};

/// Enough to regenerate an output: the resolved config's hash, the seed,
/// tool versions and a digest of the input file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub command: String,
    pub config_hash: String,
    pub seed: u64,
    pub version: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub input_sha256: Option<String>,
}

impl Provenance {
    pub fn new(command: &str, cfg: &Config, input: Option<&[u8]>) -> Self {
        Self {
            command: command.to_string(),
            config_hash: cfg.hash(),
            seed: cfg.scenario.seed,
            version: env!("CARGO_PKG_VERSION").to_string(),
            input_sha256: input.map(|b| hex::encode(Sha256::digest(b))),
        }
    }

    /// Single-line form used in CSV comment headers.
    pub fn comment(&self) -> String {
        let mut s = format!(
            "pendtilt {} command={} config_sha256={} seed={}",
            self.version, self.command, self.config_hash, self.seed
        );
        if let Some(h) = &self.input_sha256 {
            s.push_str(&format!(" input_sha256={h}"));
        }
        s
    }
}

/// Accuracy of one estimate column.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimatorEntry {
    /// Column stem: `theta_<name>_rad` in the run's CSV.
    pub name: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub params: Option<Vec<f64>>,
    pub valid_from: usize,
    pub clamp_count: usize,
    /// Absent when the log carries no `theta_true_rad`.
    pub metrics: Option<ErrorMetrics>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub provenance: Provenance,
    pub dt: f64,
    pub samples: usize,
    /// Estimator inputs passed through the causal FIR before differentiation.
    pub prefiltered: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub measurement_variance: Option<f64>,
    pub estimators: Vec<EstimatorEntry>,
}

impl RunReport {
    pub fn entry(&self, name: &str) -> Option<&EstimatorEntry> {
        self.estimators.iter().find(|e| e.name == name)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitFile {
    pub provenance: Provenance,
    pub fit: FitReport,
}

/// `run.csv` → `run.report.json`.
pub fn report_path(csv: &Path) -> PathBuf {
    csv.with_extension("report.json")
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).expect("report serialises");
    text.push('\n');
    std::fs::write(path, text).map_err(CliError::io(path))
}

pub fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path).map_err(CliError::io(path))?;
    serde_json::from_str(&text).map_err(|e| CliError::Report {
        path: path.to_path_buf(),
        message: e.to_string(),
    })
}
