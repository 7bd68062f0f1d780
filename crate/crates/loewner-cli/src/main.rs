//! `loewner`: driver specs in, CSV/JSON/SVG out.
//!
//! Exit codes: 0 success, 2 input or I/O error, 3 numerical diagnostic,
//! 4 experiment assertion failure.

mod commands;
mod experiments;
mod output;
mod svg;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use loewner::driver::DriverSpec;
use loewner::{Driver, Orientation, StepPolicy};
use serde::Serialize;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("input error: {0}")]
    Input(String),
    #[error("numerical diagnostic: {0}")]
    Numerical(String),
    #[error("assertion failed: {0}")]
    Assertion(String),
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Input(_) => 2,
            CliError::Numerical(_) => 3,
            CliError::Assertion(_) => 4,
        }
    }
}

impl From<loewner::Error> for CliError {
    fn from(e: loewner::Error) -> Self {
        match e {
            loewner::Error::InvalidInput(_) => CliError::Input(e.to_string()),
            _ => CliError::Numerical(e.to_string()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Input(e.to_string())
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        CliError::Input(e.to_string())
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError::Input(e.to_string())
    }
}

pub type CliResult<T> = Result<T, CliError>;

#[derive(Parser, Debug)]
#[command(name = "loewner", version, about = "Hitting times, weldings, curves and experiments for upward Loewner drivers")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    opts: Opts,
}

#[derive(Subcommand, Debug, Clone, Copy)]
enum Command {
    /// Hitting-time branches and welding interval endpoints.
    Hitting,
    /// Conformal welding φ = τ₊⁻¹ ∘ τ₋.
    Welding,
    /// Curve generated by the driver (and by --driver2 for a comparison).
    Trace,
    /// Seeded experiment selected by --experiment.
    Experiment,
    /// Identity residuals and the maximal-time bound for pairs welded by the driver.
    Verify,
}

impl Command {
    fn name(self) -> &'static str {
        match self {
            Command::Hitting => "hitting",
            Command::Welding => "welding",
            Command::Trace => "trace",
            Command::Experiment => "experiment",
            Command::Verify => "verify",
        }
    }
}

#[derive(Args, Debug, Clone)]
struct Opts {
    /// Driver spec: a path to a JSON file or inline JSON.
    #[arg(long, global = true)]
    driver: Option<String>,
    /// Second driver for `trace` comparisons.
    #[arg(long, global = true)]
    driver2: Option<String>,
    /// Output directory, created if missing.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    /// Flow steps over the horizon (hitting, welding, verify); tracing steps (trace, energy-refinement).
    #[arg(long, global = true)]
    steps: Option<usize>,
    /// Points per branch, grid size or mesh size, depending on the command.
    #[arg(long, global = true)]
    grid: Option<usize>,
    /// Tolerance for the checks of `verify` and `experiment`.
    #[arg(long, global = true)]
    tol: Option<f64>,
    #[arg(long, global = true, default_value_t = 2024)]
    seed: u64,
    /// oscillating | counterexample | perturbation | energy-refinement | lipschitz | identities
    #[arg(long, global = true)]
    experiment: Option<String>,
    /// Number of seeded drivers or pairs in sweeps.
    #[arg(long, global = true)]
    count: Option<usize>,
}

/// Everything that determines a run; embedded in every JSON output.
#[derive(Debug, Clone, Serialize)]
pub struct RunConfig {
    pub command: String,
    pub version: String,
    pub driver: Option<DriverSpec>,
    pub driver2: Option<DriverSpec>,
    pub steps: Option<usize>,
    pub grid: Option<usize>,
    pub tol: Option<f64>,
    pub seed: u64,
    pub experiment: Option<String>,
    pub count: Option<usize>,
    #[serde(skip)]
    pub out: PathBuf,
}

impl RunConfig {
    /// The driver from --driver, reversed to upward if given downward.
    pub fn driver(&self) -> CliResult<Option<(Driver, bool)>> {
        self.driver.clone().map(to_upward).transpose()
    }

    pub fn require_driver(&self) -> CliResult<(Driver, bool)> {
        self.driver()?.ok_or_else(|| CliError::Input("--driver is required".into()))
    }

    pub fn driver2(&self) -> CliResult<Option<(Driver, bool)>> {
        self.driver2.clone().map(to_upward).transpose()
    }

    /// Default policy, or one with step T/steps.
    pub fn policy(&self, horizon: f64) -> StepPolicy {
        match self.steps {
            Some(n) => StepPolicy::default().with_base_step(horizon / n as f64),
            None => StepPolicy::default(),
        }
    }

    pub fn grid_or(&self, default: usize) -> usize {
        self.grid.unwrap_or(default)
    }

    pub fn tol_or(&self, default: f64) -> f64 {
        self.tol.unwrap_or(default)
    }
}

fn to_upward(spec: DriverSpec) -> CliResult<(Driver, bool)> {
    let d = Driver::try_from(spec)?;
    Ok(match d.orientation() {
        Orientation::Upward => (d, false),
        Orientation::Downward => (loewner::driver::reverse(&d), true),
    })
}

fn load_spec(arg: &str) -> CliResult<DriverSpec> {
    let text = if arg.trim_start().starts_with('{') {
        arg.to_string()
    } else {
        std::fs::read_to_string(arg).map_err(|e| CliError::Input(format!("cannot read driver file {arg}: {e}")))?
    };
    serde_json::from_str(&text).map_err(|e| CliError::Input(format!("bad driver spec: {e}")))
}

fn build_config(command: Command, opts: Opts) -> CliResult<RunConfig> {
    if let Some(t) = opts.tol {
        if !(t > 0.0 && t.is_finite()) {
            return Err(CliError::Input(format!("--tol must be positive, got {t}")));
        }
    }
    for (flag, v) in [("--steps", opts.steps), ("--grid", opts.grid), ("--count", opts.count)] {
        if v == Some(0) {
            return Err(CliError::Input(format!("{flag} must be positive")));
        }
    }
    Ok(RunConfig {
        command: command.name().to_string(),
        version: env!("CARGO_PKG_VERSION").to_string(),
        driver: opts.driver.as_deref().map(load_spec).transpose()?,
        driver2: opts.driver2.as_deref().map(load_spec).transpose()?,
        steps: opts.steps,
        grid: opts.grid,
        tol: opts.tol,
        seed: opts.seed,
        experiment: opts.experiment,
        count: opts.count,
        out: opts.out,
    })
}

fn run(cli: Cli) -> CliResult<()> {
    let config = build_config(cli.command, cli.opts)?;
    std::fs::create_dir_all(&config.out)?;
    match cli.command {
        Command::Hitting => commands::hitting(&config),
        Command::Welding => commands::welding(&config),
        Command::Trace => commands::trace(&config),
        Command::Verify => commands::verify(&config),
        Command::Experiment => experiments::run(&config),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => e.exit(),
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("loewner: {e}");
            ExitCode::from(e.code())
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exit_codes() {
        let input = CliError::from(loewner::Error::InvalidInput("x".into()));
        assert_eq!(input.code(), 2);
        let numerical = [
            loewner::Error::MonotonicityViolation { side: "left", x: -1.0, size: 1e-3 },
            loewner::Error::BeyondHorizon(3.0),
            loewner::Error::Construction("x".into()),
            loewner::Error::EmptyOverlap,
        ];
        for e in numerical {
            assert_eq!(CliError::from(e).code(), 3);
        }
        assert_eq!(CliError::Assertion("x".into()).code(), 4);
    }

    #[test]
    fn inline_and_file_specs() {
        assert!(load_spec(r#"  {"horizon": 1.0, "segments": []}"#).is_ok());
        assert!(matches!(load_spec("/no/such/file.json"), Err(CliError::Input(_))));
    }
}
