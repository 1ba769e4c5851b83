//! `superefimov`: batch front-end for tuning, spectra, counting scans and validation.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod commands;
mod config;
mod error;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use crate::commands::{Context, Suite, SOLUTION_FILE};
use crate::config::{LoadedConfig, RunConfig};
use crate::error::CliResult;

#[derive(Parser)]
#[command(name = "superefimov", version, about = "Spectral laboratory for the p-wave super Efimov operator chain")]
struct Cli {
    /// JSON run configuration; defaults apply when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory, overriding the config.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Tune the two-body coupling to resonance and write the solution file.
    Tune,
    /// Write the spectrum of one operator at every configured z.
    Spectrum {
        #[arg(long)]
        solution: Option<PathBuf>,
        /// Tplus, Tminus, scriptT, scriptTprime, B1, B2, B3, S or D.
        #[arg(long)]
        operator: String,
    },
    /// Count eigenvalues along the z list and fit the double-log law.
    CountScan {
        #[arg(long)]
        solution: Option<PathBuf>,
    },
    /// Run a check suite: dnorm, weyl, remainders or envelope.
    Validate {
        #[arg(long)]
        suite: String,
        #[arg(long)]
        solution: Option<PathBuf>,
        /// Seed of the randomized suite, overriding the config.
        #[arg(long)]
        seed: Option<u64>,
    },
}

fn run(cli: Cli) -> CliResult<()> {
    let config = match &cli.config {
        Some(path) => RunConfig::load(path)?,
        None => LoadedConfig::defaults()?,
    };
    let ctx = Context::new(config, cli.out)?;
    let solution_path = |p: Option<PathBuf>| p.unwrap_or_else(|| ctx.out.join(SOLUTION_FILE));
    match cli.command {
        Command::Tune => {
            commands::tune(&ctx)?;
        }
        Command::Spectrum { solution, operator } => {
            let label = commands::parse_label(&operator)?;
            let solution = commands::load_solution(&solution_path(solution))?;
            commands::spectrum(&ctx, &solution, label)?;
        }
        Command::CountScan { solution } => {
            let solution = commands::load_solution(&solution_path(solution))?;
            commands::count_scan(&ctx, &solution)?;
        }
        Command::Validate { suite, solution, seed } => {
            let suite = Suite::parse(&suite)?;
            let solution = if suite.needs_solution() {
                Some(commands::load_solution(&solution_path(solution))?)
            } else {
                None
            };
            let seed = seed.unwrap_or(ctx.config.config.seed);
            commands::validate(&ctx, suite, solution.as_ref(), seed)?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
