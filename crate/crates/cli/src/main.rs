//! `ionqho`: trapped-ion motional-state pipelines from the command line.

mod commands;
mod config;
mod error;
mod output;
mod spec;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use commands::Ctx;
use error::{usage, CliResult};
use output::Format;

const DEFAULT_OUT: &str = "ionqho-out";

#[derive(Parser)]
#[command(name = "ionqho", version, about = "Motional states of a trapped ion: simulate, reconstruct, fit")]
struct Cli {
    /// JSON config; flags override its fields
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Seed for every stochastic step
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Table format
    #[arg(long, global = true, value_enum)]
    format: Option<Format>,
    /// Worker threads (default: all cores)
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Build a motional state and write it with its populations
    State(spec::StateSpec),
    /// Sideband or cat-interferometer P_down traces
    Signal(commands::signal::SignalArgs),
    /// Tomography: displaced populations, reconstruction, Wigner function
    Tomo(commands::tomo::TomoCmd),
    /// White-noise dephasing Monte Carlo
    Decohere(commands::decohere::DecohereArgs),
    /// Fit traces and population distributions
    Fit(commands::fit::FitArgs),
    /// Coherent-state label under a classical force
    Propagate(commands::propagate::PropagateArgs),
}

fn run(cli: Cli) -> CliResult<()> {
    let (globals, rest) = config::load(cli.config.as_deref())?;
    if let Some(n) = cli.threads.or(globals.threads) {
        if n == 0 {
            return Err(usage("--threads must be >= 1"));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| usage(format!("cannot set up {n} threads: {e}")))?;
    }
    let ctx = Ctx {
        seed: cli.seed.or(globals.seed),
        out: cli.out.or(globals.out).unwrap_or_else(|| PathBuf::from(DEFAULT_OUT)),
        format: cli.format.or(globals.format).unwrap_or_default(),
        config: rest,
    };
    match &cli.command {
        Command::State(a) => commands::state::run(&ctx, a),
        Command::Signal(a) => commands::signal::run(&ctx, a),
        Command::Tomo(a) => commands::tomo::run(&ctx, a),
        Command::Decohere(a) => commands::decohere::run(&ctx, a),
        Command::Fit(a) => commands::fit::run(&ctx, a),
        Command::Propagate(a) => commands::propagate::run(&ctx, a),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
