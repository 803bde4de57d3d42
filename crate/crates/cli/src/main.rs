//! `torus`: orbit probes, parameter sweeps, peak refinement, continuation
//! and number-theory queries for the three-dimensional volume-preserving
//! map `y' = y + eps F(x)`, `x' = x + Omega(y')`.
//!
//! Every command that writes a CSV also writes a JSON sidecar holding the
//! full command configuration; `torus replay SIDECAR` reruns it.
//!
//! Exit codes: 0 success, 1 I/O or format error, 2 bad arguments,
//! 3 numeric failure or a failed `--check`.

mod check;
mod commands;
mod opts;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use serde::{Deserialize, Serialize};
use torus_core::Execution;

use commands::*;

#[derive(Parser, Debug)]
#[command(name = "torus", version, about = "Weighted Birkhoff averages and torus breakup for a 3D volume-preserving map")]
struct Cli {
    /// Worker threads for sweeps and statistics (0: one per core).
    #[arg(long, global = true, env = "TORUS_THREADS", default_value_t = 0)]
    threads: usize,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug, Clone, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Command {
    /// Classify one orbit and optionally dump a phase-space slice.
    Orbit(OrbitCmd),
    /// Classify a grid of orbits labelled by their unperturbed frequency.
    Sweep(SweepCmd),
    /// Classify orbits on a (y0, eps) grid at fixed delta.
    Slice(SliceCmd),
    /// Largest rotational eps per frequency bin, from sweep outputs.
    Bins(BinsCmd),
    /// Locate the most robust torus in a frequency region by refinement.
    Refine(RefineCmd),
    /// Continue a torus of fixed rotation vector to its critical eps.
    Continue(ContinueCmd),
    /// Resonance order of a frequency vector.
    Resorder(ResorderCmd),
    /// Statistics of resonance orders of random frequency vectors.
    Stats(StatsCmd),
    /// Best simultaneous approximants.
    Approx(ApproxCmd),
    /// Jacobi-Perron expansion.
    Jpa(JpaCmd),
    /// Random integral bases of a cubic field.
    Basis(BasisCmd),
    /// Rerun a command from its JSON sidecar.
    #[serde(skip)]
    Replay(ReplayCmd),
}

#[derive(clap::Args, Debug, Clone, Default)]
pub struct ReplayCmd {
    /// Sidecar written by an earlier run.
    sidecar: PathBuf,
    /// Write the CSV here instead of the recorded path.
    #[arg(long, short)]
    out: Option<PathBuf>,
}

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Numeric(String),
    Violations(Vec<String>),
    Io(String),
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Usage(m) => write!(f, "{m}"),
            CliError::Numeric(m) => write!(f, "numeric failure: {m}"),
            CliError::Io(m) => write!(f, "{m}"),
            CliError::Violations(v) => {
                write!(f, "{} invariant violation(s)", v.len())?;
                for line in v.iter().take(20) {
                    write!(f, "\n  {line}")?;
                }
                Ok(())
            }
        }
    }
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Io(_) => 1,
            CliError::Usage(_) => 2,
            CliError::Numeric(_) | CliError::Violations(_) => 3,
        }
    }
}

impl From<torus_core::Error> for CliError {
    fn from(e: torus_core::Error) -> Self {
        use torus_core::Error::*;
        match e {
            InvalidParams(_) | WindowTooShort(_) | InvalidPrecision(_) | UnknownField(_) | InvalidArgument(_)
            | PrecisionBound { .. } | LengthMismatch { .. } => CliError::Usage(e.to_string()),
            Io(_) | Format(_) => CliError::Io(e.to_string()),
            _ => CliError::Numeric(e.to_string()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e.to_string())
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError::Io(e.to_string())
    }
}

pub struct Context {
    pub exec: Execution,
    pub threads: usize,
}

fn context(threads: usize) -> Result<Context, CliError> {
    #[cfg(feature = "parallel")]
    {
        if threads > 0 {
            rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build_global()
                .map_err(|e| CliError::Usage(format!("cannot start thread pool: {e}")))?;
        }
        let n = rayon::current_num_threads();
        let exec = if n > 1 { Execution::Parallel } else { Execution::Sequential };
        Ok(Context { exec, threads: n })
    }
    #[cfg(not(feature = "parallel"))]
    {
        if threads > 1 {
            log::warn!("built without the parallel feature; running on one thread");
        }
        Ok(Context {
            exec: Execution::Sequential,
            threads: 1,
        })
    }
}

pub fn run(command: Command, ctx: &Context) -> Result<(), CliError> {
    match command {
        Command::Orbit(c) => run_orbit(c, ctx),
        Command::Sweep(c) => run_sweep(c, ctx),
        Command::Slice(c) => run_slice(c, ctx),
        Command::Bins(c) => run_bins(c, ctx),
        Command::Refine(c) => run_refine(c, ctx),
        Command::Continue(c) => run_continue(c, ctx),
        Command::Resorder(c) => run_resorder(c, ctx),
        Command::Stats(c) => run_stats(c, ctx),
        Command::Approx(c) => run_approx(c, ctx),
        Command::Jpa(c) => run_jpa(c, ctx),
        Command::Basis(c) => run_basis(c, ctx),
        Command::Replay(c) => replay(c, ctx),
    }
}

fn replay(cmd: ReplayCmd, ctx: &Context) -> Result<(), CliError> {
    let file = std::fs::File::open(&cmd.sidecar)
        .map_err(|e| CliError::Io(format!("{}: {e}", cmd.sidecar.display())))?;
    let meta: torus_core::io::RunMetadata = torus_core::io::read_json(file)?;
    let mut command: Command = serde_json::from_value(meta.config)
        .map_err(|e| CliError::Io(format!("{}: not a replayable sidecar: {e}", cmd.sidecar.display())))?;
    if let Some(out) = cmd.out {
        command.set_out(out);
    }
    log::info!("replaying {} from {}", meta.command, cmd.sidecar.display());
    run(command, ctx)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = context(cli.threads).and_then(|ctx| run(cli.command, &ctx));
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
