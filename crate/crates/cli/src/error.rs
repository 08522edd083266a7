use std::path::PathBuf;

use thiserror::Error;

/// Process exit codes.
pub mod exit {
    pub const OK: i32 = 0;
    pub const IO: i32 = 1;
    pub const USAGE: i32 = 2;
    pub const SCHEMA: i32 = 3;
    pub const NUMERICAL: i32 = 4;
    pub const NOT_CONVERGED: i32 = 5;
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),

    /// The config file was unreadable as TOML or broke a field constraint.
    #[error("config: {0}")]
    Config(String),

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },

    #[error("{}: {source}", path.display())]
    Data { path: PathBuf, source: pendtilt::Error },

    #[error(transparent)]
    Core(#[from] pendtilt::Error),

    #[error("{}: malformed report: {message}", path.display())]
    Report { path: PathBuf, message: String },

    #[error("time base of {} differs from {}", other.display(), first.display())]
    TimeBase { first: PathBuf, other: PathBuf },

    /// The fit ran to completion without meeting its tolerance. The report
    /// file is still written.
    #[error("fit did not converge after {iterations} iterations (cost {cost:e})")]
    NotConverged { iterations: usize, cost: f64 },
}

pub type Result<T, E = CliError> = std::result::Result<T, E>;

fn core_code(e: &pendtilt::Error) -> i32 {
    use pendtilt::Error as E;
    match e {
        E::InvalidParameter { .. } => exit::USAGE,
        E::Schema { .. } | E::MissingColumn(_) | E::NonUniformSampling { .. } => exit::SCHEMA,
        E::Io(_) => exit::IO,
        _ => exit::NUMERICAL,
    }
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) | CliError::Config(_) => exit::USAGE,
            CliError::Io { .. } => exit::IO,
            CliError::Data { source, .. } => core_code(source),
            CliError::Core(e) => core_code(e),
            CliError::Report { .. } | CliError::TimeBase { .. } => exit::SCHEMA,
            CliError::NotConverged { .. } => exit::NOT_CONVERGED,
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>) -> impl FnOnce(std::io::Error) -> CliError {
        let path = path.into();
        move |source| CliError::Io { path, source }
    }
}
