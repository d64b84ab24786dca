//! Command-line front end for `kdvctl-core`: configuration, file formats and
//! the batch subcommands.

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

pub mod commands;
pub mod config;
pub mod formats;
pub mod output;

pub use config::{Overrides, Resolved, RunConfig, OUT_ENV};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Config(String),
    #[error("{0}")]
    Format(String),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error(transparent)]
    Core(#[from] kdvctl_core::Error),
    #[error("{0}")]
    CheckFailed(String),
}

impl CliError {
    pub fn io(path: &Path, source: std::io::Error) -> Self {
        CliError::Io { path: path.to_path_buf(), source }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            _ => 1,
        }
    }

    fn kind(&self) -> &'static str {
        match self {
            CliError::Config(_) => "config",
            CliError::Format(_) => "format",
            CliError::Io { .. } => "io",
            CliError::Core(_) => "core",
            CliError::CheckFailed(_) => "check_failed",
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "kdvctl", version, about = "Bilinear control of the linear KdV–Schrödinger equation on the torus")]
pub struct Cli {
    /// TOML run configuration.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output directory (overrides the config file and KDVCTL_OUT).
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[arg(long, global = true, allow_hyphen_values = true)]
    pub alpha: Option<f64>,
    /// Truncation K of default states.
    #[arg(long, global = true)]
    pub k: Option<usize>,
    #[arg(long, global = true)]
    pub oversampling: Option<usize>,
    #[arg(long, global = true)]
    pub step_rate: Option<f64>,
    #[arg(long, global = true)]
    pub tail_tolerance: Option<f64>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Evolve a state under a control program.
    Simulate(SimulateArgs),
    /// Synthesize a program for the phase multiplication e^{iθ}.
    SynthPhase(SynthPhaseArgs),
    /// Synthesize a program for the transport e^{t T_f}.
    SynthTransport(SynthTransportArgs),
    /// Steer a state along a word of phases, transports and translations.
    Steer(SteerArgs),
    /// Saturation closure and certificate report.
    Saturate(SaturateArgs),
    /// Run a named convergence study.
    Convergence(ConvergenceArgs),
    /// Integrate the flow of a vector field.
    Flow(FlowArgs),
    /// Flow period of a positive field.
    Period(PeriodArgs),
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// Program JSON; an empty program when absent.
    #[arg(long)]
    pub program: Option<PathBuf>,
    /// Initial state JSON; the normalized mode 1 when absent.
    #[arg(long)]
    pub state: Option<PathBuf>,
    /// Generate a random program with this many segments instead.
    #[arg(long, conflicts_with = "program")]
    pub random: Option<usize>,
    /// Largest control norm of random segments.
    #[arg(long, default_value_t = 10.0)]
    pub max_amplitude: f64,
}

#[derive(Debug, Args)]
pub struct SynthPhaseArgs {
    /// Phase target JSON {"theta", "epsilon", "time_budget"}.
    #[arg(long)]
    pub target: PathBuf,
    #[arg(long)]
    pub state: Option<PathBuf>,
    /// Largest top-level free time tried.
    #[arg(long, default_value_t = 1e-3)]
    pub tau_top: f64,
    #[arg(long, default_value_t = 0.25)]
    pub ratio: f64,
    #[arg(long, default_value_t = 4)]
    pub max_depth: usize,
    #[arg(long, default_value_t = 40)]
    pub max_iter: usize,
}

#[derive(Debug, Args)]
pub struct SynthTransportArgs {
    /// Transport target JSON {"field", "time", "epsilon", "time_budget"}.
    #[arg(long)]
    pub target: PathBuf,
    #[arg(long)]
    pub state: Option<PathBuf>,
    /// Coarsest free time per cone realization.
    #[arg(long, default_value_t = 1.0 / 4096.0)]
    pub tau: f64,
    #[arg(long, default_value_t = 16)]
    pub cycles: usize,
    #[arg(long, default_value_t = 8)]
    pub trotter_steps: usize,
    /// Calibration points (τ halved and cycles doubled alternately).
    #[arg(long, default_value_t = 5)]
    pub points: usize,
}

#[derive(Debug, Args)]
pub struct SteerArgs {
    /// Word JSON {"atoms": [...]}.
    #[arg(long)]
    pub word: PathBuf,
    #[arg(long)]
    pub state: Option<PathBuf>,
    /// Explicit target state; the exact image of the word when absent.
    #[arg(long)]
    pub target: Option<PathBuf>,
    #[arg(long, default_value_t = 5e-2)]
    pub epsilon: f64,
    #[arg(long, default_value_t = 4)]
    pub points: usize,
}

#[derive(Debug, Args)]
pub struct SaturateArgs {
    /// Odd power of the saturation map.
    #[arg(long, default_value_t = 3)]
    pub n: usize,
    #[arg(long, default_value_t = 16)]
    pub nmax: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum StudyName {
    Strang,
    Satlimit,
    Trotter,
    Wtn,
    Period,
}

#[derive(Debug, Args)]
pub struct ConvergenceArgs {
    pub study: StudyName,
}

#[derive(Debug, Args)]
pub struct FlowArgs {
    /// Field as inline JSON {"a0", "cos", "sin"}.
    #[arg(long)]
    pub field: String,
    #[arg(long, allow_hyphen_values = true)]
    pub time: f64,
    /// Number of grid nodes.
    #[arg(long, default_value_t = 256)]
    pub m: usize,
    #[arg(long)]
    pub dt_ode: Option<f64>,
}

#[derive(Debug, Args)]
pub struct PeriodArgs {
    /// Positive field as inline JSON {"a0", "cos", "sin"}.
    #[arg(long)]
    pub field: String,
    #[arg(long, default_value_t = 4096)]
    pub nodes: usize,
}

#[derive(Serialize)]
struct Diagnostic<'a> {
    level: &'static str,
    kind: &'a str,
    exit_code: i32,
    message: String,
}

/// Parses `args`, runs the subcommand, and returns the process exit code:
/// 0 on success, 2 on invalid usage or configuration, 1 on any other failure.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let _ = env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).try_init();
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match execute(cli) {
        Ok(()) => 0,
        Err(e) => {
            let d = Diagnostic { level: "error", kind: e.kind(), exit_code: e.exit_code(), message: e.to_string() };
            eprintln!("{}", serde_json::to_string(&d).unwrap_or_else(|_| e.to_string()));
            e.exit_code()
        }
    }
}

pub fn execute(cli: Cli) -> Result<(), CliError> {
    let file = match &cli.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    let overrides = Overrides {
        alpha: cli.alpha,
        k: cli.k,
        oversampling: cli.oversampling,
        step_rate: cli.step_rate,
        tail_tolerance: cli.tail_tolerance,
        seed: cli.seed,
        out_dir: cli.out.clone(),
    };
    let env_out = std::env::var_os(OUT_ENV).filter(|v| !v.is_empty()).map(PathBuf::from);
    let cfg = file.resolve(&overrides, env_out)?;
    let out = output::OutDir::create(&cfg.config.out_dir)?;
    match &cli.command {
        Command::Simulate(a) => commands::simulate(&cfg, &out, a),
        Command::SynthPhase(a) => commands::synth_phase(&cfg, &out, a),
        Command::SynthTransport(a) => commands::synth_transport(&cfg, &out, a),
        Command::Steer(a) => commands::steer(&cfg, &out, a),
        Command::Saturate(a) => commands::saturate(&cfg, &out, a),
        Command::Convergence(a) => commands::convergence(&cfg, &out, a),
        Command::Flow(a) => commands::flow(&cfg, &out, a),
        Command::Period(a) => commands::period(&cfg, &out, a),
    }
}
