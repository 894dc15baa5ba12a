// `!(x > 0.0)` also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod commands;
mod config;

use anyhow::Context;
use canon_core::ErrorKind;
use clap::{Parser, Subcommand};
use commands::Job;
use config::{config_err, ConfigError, FileConfig, JobConfig, Overrides};
use std::path::PathBuf;
use std::process::ExitCode;

const EXIT_VERIFY_FAILED: u8 = 1;
const EXIT_PARSE: u8 = 2;
const EXIT_DOMAIN: u8 = 3;
const EXIT_CONVERGENCE: u8 = 4;

/// Batch driver for canonical systems: forward and inverse spectral problems,
/// transforms, weight characteristics and triangular factorization.
#[derive(Debug, Parser)]
#[command(name = "canon", version)]
struct Cli {
    #[command(flatten)]
    overrides: Overrides,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Spectral density and transfer diagnostics of a Hamiltonian file.
    Forward {
        #[arg(long)]
        hamiltonian: PathBuf,
        #[arg(long, default_value_t = 3.0)]
        x_max: f64,
        #[arg(long, default_value_t = 41)]
        points: usize,
    },
    /// Weyl function values at the given points.
    Weyl {
        #[arg(long)]
        hamiltonian: PathBuf,
        /// Point `re,im`; repeatable.
        #[arg(long = "z", allow_hyphen_values = true)]
        z: Vec<String>,
        /// Continue the last cell past the end of the grid.
        #[arg(long)]
        hold: bool,
    },
    /// Szego functional of the weight, or of a Hamiltonian's spectral density.
    Szego {
        #[arg(long = "z", allow_hyphen_values = true)]
        z: Vec<String>,
        #[arg(long)]
        hamiltonian: Option<PathBuf>,
    },
    /// A2 characteristics of a half-line function file.
    A2 {
        #[arg(long)]
        function: PathBuf,
        #[arg(long, default_value_t = 2)]
        levels: u32,
    },
    /// Splits a half-line function into L1 and L2 parts.
    Decompose {
        #[arg(long)]
        function: PathBuf,
    },
    /// Recovers the Hamiltonian of a weight on [0, R] with N cells.
    Invert,
    /// Applies the generalized Fourier transform to a piecewise constant function.
    Transform {
        #[arg(long)]
        hamiltonian: PathBuf,
        #[arg(long)]
        function: PathBuf,
        #[arg(long = "z", allow_hyphen_values = true)]
        z: Vec<String>,
    },
    /// Triangular factorization of the discretized Wiener-Hopf operator.
    Factorize {
        #[arg(long, default_value_t = 4)]
        oversample: usize,
    },
    /// Runs the acceptance criteria.
    Verify {
        /// Criterion number; repeatable, default all.
        #[arg(long)]
        criterion: Vec<usize>,
    },
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Forward { .. } => "forward",
            Command::Weyl { .. } => "weyl",
            Command::Szego { .. } => "szego",
            Command::A2 { .. } => "a2",
            Command::Decompose { .. } => "decompose",
            Command::Invert => "invert",
            Command::Transform { .. } => "transform",
            Command::Factorize { .. } => "factorize",
            Command::Verify { .. } => "verify",
        }
    }
}

fn init_threads() -> anyhow::Result<()> {
    let Ok(v) = std::env::var("CANON_FACTOR_THREADS") else {
        return Ok(());
    };
    let n: usize = v.trim().parse().map_err(|_| {
        config_err(format!(
            "CANON_FACTOR_THREADS must be a non-negative integer, got `{v}`"
        ))
    })?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .context("configuring the thread pool")
}

fn run(cli: Cli) -> anyhow::Result<u8> {
    init_threads()?;
    let file = match &cli.overrides.config {
        Some(p) => FileConfig::load(p)?,
        None => FileConfig::default(),
    };
    let job = Job {
        cfg: JobConfig::resolve(cli.command.name(), file, &cli.overrides)?,
    };
    let text = match &cli.command {
        Command::Forward {
            hamiltonian,
            x_max,
            points,
        } => commands::forward(&job, hamiltonian, *x_max, *points)?,
        Command::Weyl {
            hamiltonian,
            z,
            hold,
        } => commands::weyl(&job, hamiltonian, z, *hold)?,
        Command::Szego { z, hamiltonian } => commands::szego(&job, z, hamiltonian.as_deref())?,
        Command::A2 { function, levels } => commands::a2(&job, function, *levels)?,
        Command::Decompose { function } => commands::decompose(&job, function)?,
        Command::Invert => commands::invert(&job)?,
        Command::Transform {
            hamiltonian,
            function,
            z,
        } => commands::transform(&job, hamiltonian, function, z)?,
        Command::Factorize { oversample } => commands::factorize(&job, *oversample)?,
        Command::Verify { criterion } => {
            let (text, ok) = commands::verify(&job, criterion)?;
            print!("{text}");
            return Ok(if ok { 0 } else { EXIT_VERIFY_FAILED });
        }
    };
    print!("{text}");
    Ok(0)
}

/// Exit code and error class for a failure.
fn classify(err: &anyhow::Error) -> (u8, &'static str) {
    if err.downcast_ref::<ConfigError>().is_some() {
        return (EXIT_PARSE, "parse");
    }
    match err
        .chain()
        .find_map(|e| e.downcast_ref::<canon_core::Error>())
        .map(|e| e.kind())
    {
        Some(ErrorKind::Parse) => (EXIT_PARSE, "parse"),
        Some(ErrorKind::Convergence) => (EXIT_CONVERGENCE, "convergence"),
        _ => (EXIT_DOMAIN, "domain"),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(EXIT_PARSE);
        }
    };
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(err) => {
            let (code, class) = classify(&err);
            let msg = format!("{err:#}").replace('\n', " ");
            eprintln!("canon: error[{class}]: {msg}");
            ExitCode::from(code)
        }
    }
}
