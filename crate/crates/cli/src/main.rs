use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};
use cliffsemi::commands::{self, RunOptions};
use cliffsemi::config::ExperimentConfig;

#[derive(Parser)]
#[command(name = "cliffsemi", version, about = "Laplace representations of polynomial resolvents over Clifford modules")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args)]
struct Common {
    /// JSON config; `{}` or an empty file runs the defaults.
    #[arg(long)]
    config: PathBuf,
    /// Overrides the config seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Overrides the quadrature tolerance.
    #[arg(long)]
    tol: Option<f64>,
    /// Output file. Reports also get a `.csv` mirror. Defaults to stdout.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Record wall-clock time per case (reports are then not reproducible).
    #[arg(long)]
    timings: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Write a random stable operator with its growth constants.
    Gen(Common),
    /// Check P(A)^-1 against direct inversion and its norm bound.
    Invert(Common),
    /// Check the quasi-resolvent, resolvent and powers against direct inversion.
    Resolvent(Common),
    /// Run the algebra, kernel and transform identity suites.
    Verify(Common),
}

fn init_threads() -> Result<()> {
    let Ok(v) = std::env::var("CLIFFSEMI_THREADS") else { return Ok(()) };
    let threads: usize = v.trim().parse().with_context(|| format!("CLIFFSEMI_THREADS={v} is not a number"))?;
    if threads == 0 {
        bail!("CLIFFSEMI_THREADS must be positive");
    }
    rayon::ThreadPoolBuilder::new().num_threads(threads).build_global()?;
    Ok(())
}

fn load(c: &Common) -> Result<ExperimentConfig> {
    let mut cfg = ExperimentConfig::load(&c.config)?;
    if let Some(seed) = c.seed {
        cfg.seed = seed;
    }
    if let Some(tol) = c.tol {
        cfg.tol = tol;
    }
    if c.out.is_some() {
        cfg.out = c.out.clone();
    }
    cfg.validate().context("invalid config")?;
    Ok(cfg)
}

fn emit(text: &str, out: &Option<PathBuf>) -> Result<()> {
    match out {
        Some(p) => std::fs::write(p, text).with_context(|| format!("writing {}", p.display())),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

/// Returns whether every invariant held.
fn run(cli: Cli) -> Result<bool> {
    init_threads()?;
    let (name, common) = match &cli.command {
        Command::Gen(c) => ("gen", c),
        Command::Invert(c) => ("invert", c),
        Command::Resolvent(c) => ("resolvent", c),
        Command::Verify(c) => ("verify", c),
    };
    let cfg = load(common)?;
    let opts = RunOptions { timings: common.timings };
    let report = match &cli.command {
        Command::Gen(_) => {
            let text = serde_json::to_string_pretty(&commands::gen(&cfg)?)? + "\n";
            emit(&text, &cfg.out)?;
            return Ok(true);
        }
        Command::Invert(_) => commands::invert(&cfg, opts)?,
        Command::Resolvent(_) => commands::resolvent_cmd(&cfg, opts)?,
        Command::Verify(_) => commands::verify(&cfg, opts)?,
    };
    match &cfg.out {
        Some(p) => report.write(p)?,
        None => emit(&report.to_json()?, &None)?,
    }
    let s = &report.summary;
    eprintln!("{name}: {} passed, {} failed, {} skipped", s.passed, s.failed, s.skipped);
    Ok(!report.failed())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
