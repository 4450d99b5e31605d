mod commands;
mod config;

use clap::{Parser, Subcommand};
use commands::{CommandError, Outcome};
use config::RunConfig;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

const EXIT_NUMERICAL: u8 = 1;
const EXIT_USAGE: u8 = 2;

#[derive(Parser)]
#[command(name = "schrolab", version, about = "Spectra, resolvents and energy decay of a degenerate Schrodinger equation with fractional boundary damping")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Flat key = value configuration file
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory (created if missing)
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads; defaults to all cores
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Seed for randomized checks
    #[arg(long, global = true)]
    seed: Option<u64>,
}

#[derive(Subcommand, Clone, Copy)]
enum Command {
    /// Eigenvalues from the characteristic equation, with asymptotic gaps
    Spectrum,
    /// Crank-Nicolson run with energy trace and decay fit
    Simulate,
    /// Resolvent norm scan along the imaginary axis and peak-envelope slope
    Resolvent,
    /// Run every invariant suite and print a pass/fail table
    Verify,
}

fn usage(msg: impl std::fmt::Display) -> ExitCode {
    eprintln!("error: {msg}");
    ExitCode::from(EXIT_USAGE)
}

fn run(cli: Cli) -> ExitCode {
    if let Some(n) = cli.threads {
        if n == 0 {
            return usage("--threads must be at least 1");
        }
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            return usage(format!("cannot set up {n} threads: {e}"));
        }
    }
    let mut cfg = match &cli.config {
        Some(path) => match RunConfig::load(path) {
            Ok(c) => c,
            Err(e) => return usage(e),
        },
        None => RunConfig::default(),
    };
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    if let Command::Verify = cli.command {
        let (ok, table) = commands::verify(&cfg);
        print!("{table}");
        return if ok { ExitCode::SUCCESS } else { ExitCode::from(EXIT_NUMERICAL) };
    }
    let out: PathBuf = cli.out.or_else(|| cfg.out.clone()).unwrap_or_else(|| PathBuf::from("."));
    if let Err(e) = std::fs::create_dir_all(&out) {
        return usage(format!("cannot create output directory {}: {e}", out.display()));
    }
    let result = dispatch(cli.command, &cfg, &out);
    match result {
        Ok(Outcome::Success) => ExitCode::SUCCESS,
        Ok(Outcome::NumericalFailure(msg)) => {
            eprintln!("numerical failure: {msg}");
            ExitCode::from(EXIT_NUMERICAL)
        }
        Err(e @ CommandError::Numerical(_)) => {
            eprintln!("numerical failure: {e}");
            ExitCode::from(EXIT_NUMERICAL)
        }
        Err(e @ CommandError::Io { .. }) => usage(e),
    }
}

fn dispatch(cmd: Command, cfg: &RunConfig, out: &Path) -> Result<Outcome, CommandError> {
    match cmd {
        Command::Spectrum => commands::spectrum(cfg, out),
        Command::Simulate => commands::simulate_cmd(cfg, out),
        Command::Resolvent => commands::resolvent_cmd(cfg, out),
        Command::Verify => unreachable!("handled before output setup"),
    }
}

fn main() -> ExitCode {
    match Cli::try_parse() {
        Ok(cli) => run(cli),
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { 0 };
            let _ = e.print();
            ExitCode::from(code)
        }
    }
}
