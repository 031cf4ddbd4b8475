#![allow(clippy::neg_cmp_op_on_partial_ord)]

use clap::{Args, Parser, Subcommand};
use std::path::PathBuf;
use std::process::ExitCode;

mod config;
mod run;

use config::RawConfig;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("numerical result not trustworthy: {0}")]
    Numerics(String),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) | CliError::Io(_) => 1,
            CliError::Numerics(_) => 2,
        }
    }
}

/// Casimir pressure with a third-order nonlinear plate.
#[derive(Parser, Debug)]
#[command(name = "nlcasimir", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    common: Common,
}

#[derive(Subcommand, Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    /// Linear and nonlinear pressure at one gap width.
    Pressure,
    /// Pressure over the log-spaced distance grid.
    ScanDistance,
    /// I_lin and I_nl over eps_nl_values for each of eps_lin_values.
    ScanEpsilon,
    /// Transparent plate facing a mirror: general kernel vs closed form.
    Transparent,
    /// Gap width where |P_nl| = |P_lin|.
    Crossover,
    /// Operator-lab verification table.
    Verify,
}

#[derive(Args, Debug)]
struct Common {
    /// Flat key = value config file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output CSV path (stdout if absent).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true)]
    tol: Option<String>,
    #[arg(long, global = true)]
    seed: Option<String>,
    #[arg(long, global = true)]
    threads: Option<String>,
    #[arg(long, global = true)]
    eps_nl: Option<String>,
    #[arg(long, global = true)]
    eps_lin: Option<String>,
    #[arg(long, global = true)]
    eps_nl_table: Option<String>,
    #[arg(long, global = true)]
    eps_lin_table: Option<String>,
    #[arg(long, global = true, allow_hyphen_values = true)]
    chi3: Option<String>,
    /// zero, finite or high.
    #[arg(long, global = true)]
    regime: Option<String>,
    /// Kelvin; ignored when regime = zero.
    #[arg(long, global = true)]
    temperature: Option<String>,
    /// Gap width [m] for `pressure`.
    #[arg(long, global = true)]
    distance: Option<String>,
    #[arg(long, global = true)]
    d_min: Option<String>,
    #[arg(long, global = true)]
    d_max: Option<String>,
    #[arg(long, global = true)]
    d_count: Option<String>,
    /// Comma-separated list.
    #[arg(long, global = true)]
    eps_nl_values: Option<String>,
    /// Comma-separated list; `inf` for a mirror.
    #[arg(long, global = true)]
    eps_lin_values: Option<String>,
    #[arg(long, global = true)]
    lab_n: Option<String>,
    #[arg(long, global = true)]
    lab_length: Option<String>,
    #[arg(long, global = true)]
    lab_k0: Option<String>,
    #[arg(long, global = true)]
    lab_eta: Option<String>,
    #[arg(long, global = true)]
    lab_chi_scale: Option<String>,
    #[arg(long, global = true)]
    lab_b: Option<String>,
}

impl Common {
    fn overrides(&self) -> Vec<(&'static str, &Option<String>)> {
        vec![
            ("tol", &self.tol),
            ("seed", &self.seed),
            ("threads", &self.threads),
            ("eps_nl", &self.eps_nl),
            ("eps_lin", &self.eps_lin),
            ("eps_nl_table", &self.eps_nl_table),
            ("eps_lin_table", &self.eps_lin_table),
            ("chi3", &self.chi3),
            ("regime", &self.regime),
            ("temperature", &self.temperature),
            ("distance", &self.distance),
            ("d_min", &self.d_min),
            ("d_max", &self.d_max),
            ("d_count", &self.d_count),
            ("eps_nl_values", &self.eps_nl_values),
            ("eps_lin_values", &self.eps_lin_values),
            ("lab_n", &self.lab_n),
            ("lab_length", &self.lab_length),
            ("lab_k0", &self.lab_k0),
            ("lab_eta", &self.lab_eta),
            ("lab_chi_scale", &self.lab_chi_scale),
            ("lab_b", &self.lab_b),
        ]
    }
}

fn execute(cli: &Cli) -> Result<(), CliError> {
    let mut raw = match &cli.common.config {
        Some(p) => RawConfig::load(p)?,
        None => RawConfig::default(),
    };
    for (key, value) in cli.common.overrides() {
        if let Some(v) = value {
            raw.set(key, v)?;
        }
    }
    let cfg = raw.resolve()?;
    if cfg.threads > 0 {
        rayon::ThreadPoolBuilder::new()
            .num_threads(cfg.threads)
            .build_global()
            .map_err(|e| CliError::Config(format!("threads: {e}")))?;
    }
    let table = run::run(cli.command, &cfg)?;
    let text = table.render(&cfg.hash);
    match &cli.common.out {
        Some(p) => std::fs::write(p, text)?,
        None => print!("{text}"),
    }
    for note in &table.notes {
        eprintln!("{note}");
    }
    match table.failure {
        Some(msg) => Err(CliError::Numerics(msg)),
        None => Ok(()),
    }
}

fn main() -> ExitCode {
    // clap's own usage errors would exit with 2, which is reserved for numerics.
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    match execute(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
