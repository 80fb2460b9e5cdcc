use std::path::PathBuf;
use std::process::ExitCode;

use basketopt_cli::{exit_code, load, run, Command, Overrides, RunConfig};
use basketopt_core::{Error, Result};
use clap::{Args, Parser, Subcommand};

/// Operating characteristics and tuning-parameter optimization for Bayesian
/// basket trials with similarity-based borrowing.
#[derive(Parser)]
#[command(name = "basketopt", version)]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Operating characteristics of one catalog set at one φ.
    Oc(Flags),
    /// Optimize a utility over (λ, ε, τ).
    Optimize(Flags),
    /// Optimizer benchmark (Part I).
    Benchmark(Flags),
    /// Utility comparison tables (Parts II and III).
    Study(Flags),
    /// Extreme borrowing boundary over τ.
    Boundary(Flags),
    /// Type-I error of a null stratum against a moving neighbour.
    ToerCurve(Flags),
}

#[derive(Args)]
struct Flags {
    /// JSON configuration document.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Catalog set (1-7).
    #[arg(long)]
    set: Option<String>,
    /// Scenario label within the set (`oc` only).
    #[arg(long)]
    scenario: Option<String>,
    /// Tuning parameters as `lambda,epsilon,tau`.
    #[arg(long, allow_hyphen_values = true)]
    phi: Option<String>,
    /// `exact` or `mc`.
    #[arg(long)]
    backend: Option<String>,
    #[arg(long)]
    seed: Option<u64>,
    /// Simulated datasets per scenario.
    #[arg(long = "n-mc")]
    n_mc: Option<usize>,
    /// Objective evaluations per optimizer run.
    #[arg(long)]
    budget: Option<usize>,
    /// Worker threads (defaults to available parallelism).
    #[arg(long)]
    workers: Option<usize>,
    #[arg(long = "out-dir")]
    out_dir: Option<PathBuf>,
}

fn resolve(command: Command, flags: &Flags) -> Result<RunConfig> {
    let mut cfg = match &flags.config {
        Some(path) => load(path)?,
        None => RunConfig::default(),
    };
    cfg.apply(&Overrides {
        set: flags.set.clone(),
        scenario: flags.scenario.clone(),
        phi: flags.phi.clone(),
        backend: flags.backend.clone(),
        seed: flags.seed,
        n_mc: flags.n_mc,
        budget: flags.budget,
        workers: flags.workers,
        out_dir: flags.out_dir.clone(),
    })?;
    cfg.validate(command)?;
    Ok(cfg)
}

fn execute(command: Command, flags: &Flags) -> Result<Vec<PathBuf>> {
    let cfg = resolve(command, flags)?;
    if let Some(n) = cfg.workers {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Error::Config(format!("workers: {e}")))?;
    }
    run(command, &cfg)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (command, flags) = match &cli.command {
        Cmd::Oc(f) => (Command::Oc, f),
        Cmd::Optimize(f) => (Command::Optimize, f),
        Cmd::Benchmark(f) => (Command::Benchmark, f),
        Cmd::Study(f) => (Command::Study, f),
        Cmd::Boundary(f) => (Command::Boundary, f),
        Cmd::ToerCurve(f) => (Command::ToerCurve, f),
    };
    match execute(command, flags) {
        Ok(paths) => {
            for p in paths {
                println!("{}", p.display());
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            if let Error::OutcomeSpaceTooLarge { .. } = e {
                eprintln!("hint: rerun with `--backend mc` (and optionally `--n-mc N`) to simulate instead");
            }
            ExitCode::from(exit_code(&e))
        }
    }
}
