//! `hjlab`: runs Hopf-Lax solves, BV verdicts, entropy sweeps and the
//! counterexample study from a JSON config and writes CSV/JSON outputs.

mod commands;
mod config;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use crate::commands::Outcome;
use crate::config::RunConfig;
use crate::output::{Format, Writer};

#[derive(Debug)]
pub enum CliError {
    /// Bad config, bad flags, violated preconditions, unwritable output.
    Config(String),
    /// The numerics failed on a valid input.
    Numeric(String),
}

impl From<hjlab::Error> for CliError {
    fn from(e: hjlab::Error) -> Self {
        if e.is_input_error() {
            CliError::Config(e.to_string())
        } else {
            CliError::Numeric(e.to_string())
        }
    }
}

#[derive(Parser, Debug)]
#[command(name = "hjlab", version, about = "Hopf-Lax solutions, BV bounds and ε-entropy of Hamilton-Jacobi solution sets")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    /// Overrides the config seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[arg(long, global = true, value_enum, default_value = "csv")]
    format: Format,
}

#[derive(Subcommand, Debug, Clone, Copy)]
enum Command {
    /// Solve on a grid and write u, Du, b and the minimizers.
    Solve,
    /// BV-bound verdicts over a batch of data.
    BvCheck,
    /// Covering/packing counts next to the theoretical entropy bounds.
    Entropy,
    /// TV blow-up sweep for the degenerate quartic Hamiltonian.
    Counterexample,
    /// Closed-form and numeric Legendre conjugates at given points.
    Legendre,
    /// Convexity constants and the Ψ/Φ moduli.
    Moduli,
}

impl Command {
    fn name(self) -> &'static str {
        match self {
            Command::Solve => "solve",
            Command::BvCheck => "bv-check",
            Command::Entropy => "entropy",
            Command::Counterexample => "counterexample",
            Command::Legendre => "legendre",
            Command::Moduli => "moduli",
        }
    }
}

fn run(cli: &Cli) -> Result<Outcome, CliError> {
    let path = cli.config.as_ref().ok_or_else(|| CliError::Config("--config is required".into()))?;
    let mut cfg = RunConfig::load(path)?;
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    if let Some(n) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Config(format!("cannot set thread count: {e}")))?;
    }
    let mut out = Writer::new(&cli.out, cli.format, cli.command.name(), &cfg)?;
    let outcome = match cli.command {
        Command::Solve => commands::solve_cmd(&cfg, &mut out),
        Command::BvCheck => commands::bv_check_cmd(&cfg, &mut out),
        Command::Entropy => commands::entropy_cmd(&cfg, &mut out),
        Command::Counterexample => commands::counterexample_cmd(&cfg, &mut out),
        Command::Legendre => commands::legendre_cmd(&cfg, &mut out),
        Command::Moduli => commands::moduli_cmd(&cfg, &mut out),
    }?;
    for p in out.written() {
        println!("{}", p.display());
    }
    Ok(outcome)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(Outcome::Ok) => ExitCode::SUCCESS,
        Ok(Outcome::VerdictFailed(msg)) => {
            eprintln!("verdict failed: {msg}");
            ExitCode::from(4)
        }
        Err(CliError::Config(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(CliError::Numeric(msg)) => {
            eprintln!("numeric failure: {msg}");
            ExitCode::from(3)
        }
    }
}
