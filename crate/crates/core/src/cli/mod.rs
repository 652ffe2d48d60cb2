//! Command-line front end: `run`, `simulate`, `oracle` and `check-lemmas`.
//!
//! Exit codes: 0 success, 1 internal error or failed check, 2 invalid input
//! or arguments, 3 instance too large for the oracle.

pub mod schema;
mod simulate;

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::engine::{oracle_max_corner, pfilter, EngineOptions, DEFAULT_TOLERANCE};
use crate::error::{Error, Result};
use crate::model::{IcMode, Problem};
use crate::montecarlo::lemmas::{run_suite, Suite, DEFAULT_REPS};

pub use schema::{parse_problem, problem_from_csv, write_problem, ProblemFile};
pub use simulate::{simulate, SimConfig};

#[derive(Debug, Parser)]
#[command(name = "pfilter", version, about = "Multi-layer FDR control with the p-filter")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Compute rejections for a problem file.
    Run(RunArgs),
    /// Estimate per-layer FDR and power by simulation.
    Simulate(SimulateArgs),
    /// Compare the engine with the exhaustive oracle on a small problem.
    Oracle(OracleArgs),
    /// Run the stochastic lemma checks.
    CheckLemmas(LemmaArgs),
}

#[derive(Debug, Args)]
pub struct EngineFlags {
    /// Override the internal consistency mode of the input.
    #[arg(long, value_parser = parse_ic)]
    pub ic: Option<IcMode>,
    #[arg(long, default_value_t = DEFAULT_TOLERANCE)]
    pub tolerance: f64,
}

#[derive(Debug, Args)]
pub struct RunArgs {
    /// JSON problem, or a CSV with one p-value per line.
    #[arg(long)]
    pub input: PathBuf,
    /// Defaults to standard output.
    #[arg(long)]
    pub output: Option<PathBuf>,
    /// Level of the single finest layer built from CSV input.
    #[arg(long, default_value_t = 0.1)]
    pub alpha: f64,
    #[command(flatten)]
    pub engine: EngineFlags,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[arg(long)]
    pub config: PathBuf,
    #[arg(long)]
    pub reps: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// JSON report; plot data goes next to it with a `.plot.csv` suffix.
    #[arg(long)]
    pub output: PathBuf,
    #[command(flatten)]
    pub engine: EngineFlags,
}

#[derive(Debug, Args)]
pub struct OracleArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long, default_value_t = 0.1)]
    pub alpha: f64,
    #[command(flatten)]
    pub engine: EngineFlags,
}

#[derive(Debug, Args)]
pub struct LemmaArgs {
    /// superuniformity, group, inverse-binomial, simes-dist or all.
    #[arg(long, default_value = "all")]
    pub suite: String,
    #[arg(long, default_value_t = DEFAULT_REPS)]
    pub reps: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

fn parse_ic(s: &str) -> std::result::Result<IcMode, String> {
    match s {
        "weak" => Ok(IcMode::Weak),
        "strong" => Ok(IcMode::Strong),
        other => Err(format!("expected weak or strong, got {other:?}")),
    }
}

impl EngineFlags {
    fn options(&self) -> Result<EngineOptions> {
        if !(self.tolerance > 0.0 && self.tolerance.is_finite()) {
            return Err(Error::InvalidArgument(format!("tolerance {} must be finite and positive", self.tolerance)));
        }
        Ok(EngineOptions {
            ic_mode: self.ic,
            tolerance: self.tolerance,
            ..EngineOptions::default()
        })
    }
}

/// Exit code for an error.
pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::Invalid(_) | Error::InvalidArgument(_) | Error::Config(_) | Error::Json(_) => 2,
        Error::LatticeTooLarge { .. } => 3,
        _ => 1,
    }
}

/// Loads a problem from JSON, or from CSV when the path ends in `.csv`.
pub fn load_problem(path: &Path, alpha: f64) -> Result<Problem> {
    let is_csv = path.extension().is_some_and(|e| e.eq_ignore_ascii_case("csv"));
    let unreadable = |e: std::io::Error| Error::Config(format!("{}: {e}", path.display()));
    let problem = if is_csv {
        problem_from_csv(fs::File::open(path).map_err(unreadable)?, alpha)?
    } else {
        parse_problem(&fs::read_to_string(path).map_err(unreadable)?)?
    };
    problem.ensure_valid()?;
    Ok(problem)
}

fn write_out(path: Option<&Path>, text: &str) -> Result<()> {
    match path {
        Some(p) => fs::write(p, format!("{text}\n"))?,
        None => writeln!(std::io::stdout(), "{text}")?,
    }
    Ok(())
}

fn run(args: &RunArgs) -> Result<i32> {
    let problem = load_problem(&args.input, args.alpha)?;
    let result = pfilter(&problem, &args.engine.options()?)?;
    log::info!("rejected {} of {} hypotheses", result.elementary.len(), problem.n());
    write_out(args.output.as_deref(), &serde_json::to_string_pretty(&result)?)?;
    Ok(0)
}

fn oracle(args: &OracleArgs) -> Result<i32> {
    let problem = load_problem(&args.input, args.alpha)?;
    let options = args.engine.options()?;
    // the size check comes first so oversized inputs never reach the search
    let report = oracle_max_corner(&problem, &options)?;
    let engine = pfilter(&problem, &options)?;
    let matched = engine
        .k_hat
        .0
        .iter()
        .zip(&report.corner.0)
        .all(|(a, b)| (a - b).abs() <= 1e-9);
    println!("engine k: {:?}", engine.k_hat.0);
    println!("oracle k: {:?}", report.corner.0);
    println!("corner feasible: {}", report.corner_feasible);
    println!("{}", if matched { "match" } else { "MISMATCH" });
    Ok(if matched && report.corner_feasible { 0 } else { 1 })
}

fn check_lemmas(args: &LemmaArgs) -> Result<i32> {
    let suite: Suite = args.suite.parse()?;
    let reports = run_suite(suite, args.reps, args.seed)?;
    let mut failed = 0;
    for r in &reports {
        println!("{r}");
        failed += usize::from(!r.passed);
    }
    println!("{} checks, {failed} failed", reports.len());
    Ok(i32::from(failed > 0))
}

/// Honours `PFILTER_THREADS` for the rayon pool.
fn configure_threads() -> Result<()> {
    if let Ok(v) = std::env::var("PFILTER_THREADS") {
        let n: usize = v
            .parse()
            .map_err(|_| Error::InvalidArgument(format!("PFILTER_THREADS={v:?} is not a thread count")))?;
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Error::InvalidArgument(format!("thread pool: {e}")))?;
    }
    Ok(())
}

/// Runs a parsed command line and returns the process exit code.
pub fn execute(cli: &Cli) -> i32 {
    let outcome = configure_threads().and_then(|()| match &cli.command {
        Command::Run(a) => run(a),
        Command::Simulate(a) => simulate::run(a),
        Command::Oracle(a) => oracle(a),
        Command::CheckLemmas(a) => check_lemmas(a),
    });
    match outcome {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}
