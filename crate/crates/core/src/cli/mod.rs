//! Batch driver: `eelab <mode> --config <path> [--out <dir>] [--seed <n>] [--threads <n>]`
//! and `eelab compare <a.csv> <b.csv>`.

pub mod compare;
pub mod config;
mod modes;
pub mod output;

use clap::{Args, Parser, Subcommand};
use std::path::{Path, PathBuf};
use std::time::Instant;

pub use config::{Mode, RunConfig};
pub use output::{Check, Outcome};

use crate::error::{Error, Result};

/// Runs `mode` on an already resolved config.
pub fn execute(mode: Mode, config: &RunConfig) -> Result<Outcome> {
    modes::execute(mode, config)
}

/// Loads, resolves and runs a config file, optionally overriding its seed.
pub fn run_file(mode: Option<Mode>, path: &Path, seed: Option<u64>) -> Result<(Mode, RunConfig, Outcome)> {
    let raw = RunConfig::load(path)?;
    let mode = raw.effective_mode(mode)?;
    let mut cfg = raw.resolved(mode);
    if seed.is_some() {
        cfg.seed = seed;
    }
    let outcome = execute(mode, &cfg)?;
    Ok((mode, cfg, outcome))
}

#[derive(Debug, Parser)]
#[command(name = "eelab", version, about = "Entanglement entropy scaling of Fermi gases: sweeps, fits and verification suites")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Continuum Nyström entropy sweep of the free gas.
    SweepFree(RunArgs),
    /// Lattice sweep of a compactly perturbed gas against its free reference.
    SweepPerturbed(RunArgs),
    /// Enhanced-area-law fit with log-base resolution against the chain oracle.
    Fit(RunArgs),
    /// Scalar and random-matrix inequality suites.
    VerifyInequalities(RunArgs),
    /// Contour-integral projector against spectral oracles.
    RieszCheck(RunArgs),
    /// Exponential decay of the free resolvent kernel.
    GreenDecay(RunArgs),
    /// Per-L differences between two results.csv files.
    Compare {
        a: PathBuf,
        b: PathBuf,
        /// Directory for compare.json.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Debug, Args)]
pub struct RunArgs {
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Output directory; defaults to eelab-out/<mode>.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Worker threads; defaults to the number of cores.
    #[arg(long)]
    pub threads: Option<usize>,
    /// Print the config with every default made explicit, then exit.
    #[arg(long)]
    pub print_config: bool,
}

impl Command {
    fn mode(&self) -> Option<(Mode, &RunArgs)> {
        let m = match self {
            Command::SweepFree(a) => (Mode::SweepFree, a),
            Command::SweepPerturbed(a) => (Mode::SweepPerturbed, a),
            Command::Fit(a) => (Mode::Fit, a),
            Command::VerifyInequalities(a) => (Mode::VerifyInequalities, a),
            Command::RieszCheck(a) => (Mode::RieszCheck, a),
            Command::GreenDecay(a) => (Mode::GreenDecay, a),
            Command::Compare { .. } => return None,
        };
        Some(m)
    }
}

/// Exit status: 0 when every check passed, 1 on failed checks or error rows, 2 on invalid input.
pub fn main_with(cli: Cli) -> i32 {
    match dispatch(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("eelab: {e}");
            2
        }
    }
}

fn dispatch(cli: Cli) -> Result<i32> {
    if let Command::Compare { a, b, out } = &cli.command {
        let report = compare::compare_files(a, b)?;
        print!("{}", report.render());
        if let Some(dir) = out {
            std::fs::create_dir_all(dir)?;
            let json = serde_json::to_string_pretty(&report).map_err(|e| Error::Parse(e.to_string()))?;
            std::fs::write(dir.join("compare.json"), json + "\n")?;
        }
        return Ok(0);
    }
    let (mode, args) = cli.command.mode().expect("run modes carry RunArgs");
    let raw = match &args.config {
        Some(p) => RunConfig::load(p)?,
        None if args.print_config => RunConfig::default(),
        None => return Err(Error::config("config", "--config <path> is required")),
    };
    let mode = raw.effective_mode(Some(mode))?;
    let mut cfg = raw.resolved(mode);
    if args.seed.is_some() {
        cfg.seed = args.seed;
    }
    if args.print_config {
        print!("{}", cfg.to_toml());
        return Ok(0);
    }
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(n) = args.threads {
        if n == 0 {
            return Err(Error::config("threads", "must be positive"));
        }
        pool = pool.num_threads(n);
    }
    let pool = pool.build().map_err(|e| Error::Precondition(format!("thread pool: {e}")))?;
    let start = Instant::now();
    let outcome = pool.install(|| execute(mode, &cfg))?;
    let elapsed = start.elapsed().as_secs_f64();
    let dir = args.out.clone().unwrap_or_else(|| PathBuf::from("eelab-out").join(mode.name()));
    output::write_outputs(&dir, mode, &cfg, &outcome, elapsed)?;
    for c in &outcome.checks {
        println!(
            "{} {} = {:.6e} ({} {:.6e})",
            if c.passed { "PASS" } else { "FAIL" },
            c.name,
            c.value,
            c.relation,
            c.threshold
        );
    }
    let errors = outcome.error_rows();
    if errors > 0 {
        println!("{errors} run(s) failed; see status column of {}", dir.join("results.csv").display());
    }
    println!("wrote {} in {elapsed:.1}s", dir.display());
    Ok(if outcome.passed() { 0 } else { 1 })
}
