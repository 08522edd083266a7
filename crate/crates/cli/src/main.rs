use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use pendtilt::Algorithm;
use pendtilt_cli::commands::{self, SUMMARY_KEYS};
use pendtilt_cli::{
    display_report, exit, CliError, Config, EstimateArgs, FitArgs, FitMode, KalmanArgs, Method, ReportArgs,
};

#[derive(Parser)]
#[command(name = "pendtilt", version, about = "Pendulum-based tilt estimation toolkit")]
struct Cli {
    /// TOML run configuration; defaults apply to omitted keys.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides `scenario.seed`.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output file (directory for `report`).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Show angles in degrees on stdout. Files always hold radians.
    #[arg(long, global = true)]
    degrees: bool,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Simulate the configured scenario and write its sensor log.
    Simulate,
    /// Run tilt estimators over a sensor log.
    Estimate {
        #[arg(long)]
        input: PathBuf,
        /// Methods to run; all of them when omitted.
        #[arg(long = "algo", value_enum, value_delimiter = ',')]
        methods: Vec<Method>,
        /// Fit report whose parameters replace the nominal ones.
        #[arg(long)]
        params: Option<PathBuf>,
        /// Pass the inputs through the causal FIR before estimation.
        #[arg(long)]
        prefilter: bool,
    },
    /// Identify estimator parameters with Newton iteration.
    Fit {
        #[arg(long)]
        input: PathBuf,
        #[arg(long, value_enum, default_value = "offline")]
        mode: FitMode,
        #[arg(long, default_value = "algo2")]
        algo: Algorithm,
        /// Comma-separated starting parameters.
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        p0: Option<Vec<f64>>,
        #[arg(long)]
        prefilter: bool,
    },
    /// Fuse the gyro with an angle measurement in the Kalman filter.
    Kalman {
        #[arg(long)]
        input: PathBuf,
        #[arg(long, value_enum, default_value = "algo2")]
        measurement: Method,
        #[arg(long)]
        params: Option<PathBuf>,
        /// Measurement variance (rad²); calibrated from the data when absent.
        #[arg(long)]
        r: Option<f64>,
        #[arg(long)]
        prefilter: bool,
    },
    /// Emit plot data and a summary table for estimate or kalman outputs.
    Report {
        /// CSV outputs, each with its `.report.json` alongside.
        runs: Vec<PathBuf>,
        /// Plot the angles as estimated, without zero-phase smoothing.
        #[arg(long)]
        no_filter: bool,
    },
}

fn run(cli: Cli) -> Result<(), CliError> {
    let cfg = match &cli.config {
        Some(p) => Config::load(p)?,
        None => Config::default(),
    }
    .resolve(cli.seed)?;
    let out = cli
        .out
        .clone()
        .ok_or_else(|| CliError::Usage("--out is required".into()))?;
    match cli.cmd {
        Cmd::Simulate => {
            let s = commands::simulate(&cfg, &out)?;
            println!("samples = {}", s.len());
            println!("config_sha256 = {}", cfg.hash());
        }
        Cmd::Estimate {
            input,
            methods,
            params,
            prefilter,
        } => {
            let args = EstimateArgs {
                input,
                methods,
                params,
                prefilter,
                out,
            };
            let report = commands::estimate(&cfg, &args)?;
            display_report(&report, cli.degrees).iter().for_each(|l| println!("{l}"));
        }
        Cmd::Fit {
            input,
            mode,
            algo,
            p0,
            prefilter,
        } => {
            let args = FitArgs {
                input,
                mode,
                algorithm: algo,
                p0,
                prefilter,
                out,
            };
            let file = commands::fit(&cfg, &args)?;
            let f = &file.fit;
            for (label, v) in f.final_params.labels.iter().zip(&f.final_params.values) {
                println!("{label} = {v}");
            }
            println!("iterations = {}", f.iterations);
            println!("cost = {}", f.final_cost());
        }
        Cmd::Kalman {
            input,
            measurement,
            params,
            r,
            prefilter,
        } => {
            let args = KalmanArgs {
                input,
                measurement,
                params,
                r,
                prefilter,
                out,
            };
            let report = commands::kalman(&cfg, &args)?;
            display_report(&report, cli.degrees).iter().for_each(|l| println!("{l}"));
        }
        Cmd::Report { runs, no_filter } => {
            let args = ReportArgs {
                runs,
                out_dir: out,
                filter: !no_filter,
            };
            let rows = commands::report(&cfg, &args)?;
            for r in rows {
                for (k, v) in SUMMARY_KEYS.iter().zip(&r.values) {
                    let line = match (cli.degrees, k.strip_suffix("_rad")) {
                        (true, Some(stem)) => {
                            let deg = v.parse::<f64>().map(f64::to_degrees).unwrap_or(f64::NAN);
                            format!("{}.{}.{stem}_deg = {deg}", r.run, r.estimator)
                        }
                        _ => format!("{}.{}.{k} = {v}", r.run, r.estimator),
                    };
                    println!("{line}");
                }
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::from(exit::OK as u8),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
