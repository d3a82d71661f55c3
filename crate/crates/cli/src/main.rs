//! `loglap`: verification suites and solvers for the logarithmic Laplacian.
//!
//! Exit codes: 0 success, 1 a check failed or a computation did not
//! converge, 2 usage or configuration error.

// `!(x > 0.0)` is used on purpose so that NaN is rejected too
#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod commands;
mod config;
mod report;
mod suites;

use clap::{Args, Parser, Subcommand};
use config::{parse_json, ConfigError, GradingKind, OutputFormat, RunConfig};
use loglap::LoglapError;
use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Debug, Parser)]
#[command(name = "loglap", version, about = "Logarithmic Laplacian toolkit")]
struct Cli {
    /// JSON run configuration; flags override its values.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true, value_enum)]
    format: Option<OutputFormat>,
    /// Write the report here instead of stdout.
    #[arg(long, global = true)]
    output: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Print c_N, rho_N, sigma_N and the maximum principle thresholds.
    Constants {
        #[arg(long)]
        dim: Option<usize>,
    },
    /// Evaluate the operator of a builtin or tabulated field at points.
    Eval {
        /// Field spec as JSON, e.g. '{"kind":"gaussian","dim":1}'.
        #[arg(long)]
        field: Option<String>,
        /// Points as a JSON array of arrays.
        #[arg(long)]
        points: Option<String>,
    },
    /// Barrier probes J, J2 and far field over an epsilon sweep, plus positivity.
    BarrierProbe {
        #[arg(long)]
        dim: Option<usize>,
        #[arg(long)]
        zeta: Option<f64>,
        #[arg(long)]
        quick: bool,
    },
    /// Kelvin transform identity on the fixed suite.
    KelvinVerify {
        #[arg(long)]
        dim: Option<usize>,
    },
    /// Torsion function of an interval or ball with its boundary exponent fit.
    Torsion {
        #[command(flatten)]
        grid: GridArgs,
        /// Also write the FitReport JSON here.
        #[arg(long)]
        fit_output: Option<PathBuf>,
    },
    /// Fit |u| ~ C l^alpha(delta) to a stored grid function.
    ExponentFit {
        /// Grid function file: JSON {nodes, values} or CSV node,value.
        #[arg(long)]
        input: Option<PathBuf>,
        #[arg(long)]
        domain: Option<String>,
        #[arg(long, value_parser = parse_window)]
        window: Option<[f64; 2]>,
    },
    /// Minimise the sublinear energy with parameter mu.
    Sublinear {
        #[command(flatten)]
        grid: GridArgs,
        #[arg(long)]
        mu: Option<f64>,
    },
    /// Run every acceptance check.
    VerifyAll {
        /// Smaller grids and sweeps.
        #[arg(long)]
        quick: bool,
    },
}

#[derive(Debug, Args)]
struct GridArgs {
    /// Domain spec as JSON, e.g. '{"kind":"interval","a":0,"b":0.5}'.
    #[arg(long)]
    domain: Option<String>,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long, value_enum)]
    grading: Option<GradingKind>,
    #[arg(long)]
    delta_min: Option<f64>,
    /// Fit window in delta as "lo,hi".
    #[arg(long, value_parser = parse_window)]
    window: Option<[f64; 2]>,
}

fn parse_window(s: &str) -> Result<[f64; 2], String> {
    let parts: Vec<&str> = s.split(',').map(str::trim).collect();
    match parts.as_slice() {
        [a, b] => Ok([a.parse().map_err(|e| format!("{e}"))?, b.parse().map_err(|e| format!("{e}"))?]),
        _ => Err("expected lo,hi".into()),
    }
}

/// Failure classes, each with its exit code.
#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Failed(String),
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Failed(_) => 1,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Usage(m) | CliError::Failed(m) => f.write_str(m),
        }
    }
}

impl From<ConfigError> for CliError {
    fn from(e: ConfigError) -> Self {
        CliError::Usage(e.0)
    }
}

impl From<LoglapError> for CliError {
    fn from(e: LoglapError) -> Self {
        match e {
            LoglapError::NotConverged(_) | LoglapError::SingularMatrix(_) => CliError::Failed(e.to_string()),
            _ => CliError::Usage(e.to_string()),
        }
    }
}

fn grid_overrides(g: GridArgs) -> Result<RunConfig, ConfigError> {
    Ok(RunConfig {
        domain: g.domain.map(|d| parse_json(&d, "domain")).transpose()?,
        n: g.n,
        grading: g.grading,
        delta_min: g.delta_min,
        window: g.window,
        ..Default::default()
    })
}

fn configure_threads() -> Result<(), ConfigError> {
    let Ok(v) = std::env::var("LOGLAP_THREADS") else { return Ok(()) };
    let n: usize = v.trim().parse().map_err(|_| ConfigError(format!("LOGLAP_THREADS must be a positive integer, got {v:?}")))?;
    if n == 0 {
        return Err(ConfigError("LOGLAP_THREADS must be a positive integer".into()));
    }
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| ConfigError(e.to_string()))
}

fn run(cli: Cli) -> Result<bool, CliError> {
    configure_threads()?;
    let base = match &cli.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    let global = RunConfig { format: cli.format, output: cli.output, ..Default::default() };
    let mut fit_output = None;
    let (flags, which) = match cli.command {
        Command::Constants { dim } => (RunConfig { dim, ..Default::default() }, "constants"),
        Command::Eval { field, points } => (
            RunConfig {
                field: field.map(|f| parse_json(&f, "field")).transpose()?,
                points: points.map(|p| parse_json(&p, "points")).transpose()?,
                ..Default::default()
            },
            "eval",
        ),
        Command::BarrierProbe { dim, zeta, quick } => {
            (RunConfig { dim, zeta, quick: quick.then_some(true), ..Default::default() }, "barrier-probe")
        }
        Command::KelvinVerify { dim } => (RunConfig { dim, ..Default::default() }, "kelvin-verify"),
        Command::Torsion { grid, fit_output: f } => {
            fit_output = f;
            (grid_overrides(grid)?, "torsion")
        }
        Command::ExponentFit { input, domain, window } => (
            RunConfig {
                input,
                domain: domain.map(|d| parse_json(&d, "domain")).transpose()?,
                window,
                ..Default::default()
            },
            "exponent-fit",
        ),
        Command::Sublinear { grid, mu } => {
            let mut c = grid_overrides(grid)?;
            c.mu = mu;
            (c, "sublinear")
        }
        Command::VerifyAll { quick } => (RunConfig { quick: quick.then_some(true), ..Default::default() }, "verify-all"),
    };
    let cfg = base.overlay(global).overlay(flags);
    let report = match which {
        "constants" => commands::constants(&cfg)?,
        "eval" => commands::eval(&cfg)?,
        "barrier-probe" => commands::barrier_probe(&cfg)?,
        "kelvin-verify" => commands::kelvin_verify(&cfg)?,
        "torsion" => commands::torsion(&cfg, fit_output.as_deref())?,
        "exponent-fit" => commands::exponent_fit_report(&cfg)?,
        "sublinear" => commands::sublinear(&cfg)?,
        _ => suites::verify_all(&cfg)?,
    };
    let format = cfg.format.unwrap_or_default();
    let text = report.render(format);
    match &cfg.output {
        Some(p) => std::fs::write(p, text).map_err(|e| CliError::Usage(format!("{}: {e}", p.display())))?,
        None => std::io::stdout()
            .write_all(text.as_bytes())
            .map_err(|e| CliError::Failed(e.to_string()))?,
    }
    if format == OutputFormat::Csv || cfg.output.is_some() {
        report
            .write_checks(&mut std::io::stderr())
            .map_err(|e| CliError::Failed(e.to_string()))?;
    }
    Ok(report.all_passed())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.code())
        }
    }
}
