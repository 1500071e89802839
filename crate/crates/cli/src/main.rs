//! `forage`: simulate foraging episodes, solve for normative leave times,
//! analyze logs and draw figures.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

mod analyze;
mod manifest;
mod report;
mod simulate;
mod solve;
mod svg;

#[derive(Parser)]
#[command(name = "forage", version, about = "Two-patch foraging laboratory")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a batch of episodes and write one JSONL log per episode.
    Simulate(SimulateArgs),
    /// Solve for the MVT or discounted-MVT leave step.
    Solve(SolveArgs),
    /// Analyze episode logs into CSV tables and a JSON summary.
    Analyze(AnalyzeArgs),
    /// Draw SVG figures from an analysis directory.
    Report(ReportArgs),
}

#[derive(Args)]
pub struct SimulateArgs {
    /// Run configuration (JSON). Defaults apply when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory; overrides `out_dir` in the config.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Base seed; overrides `evaluation.base_seed`.
    #[arg(long)]
    seed: Option<u64>,
    /// Episodes per distance; overrides `evaluation.episodes_per_distance`.
    #[arg(long)]
    episodes: Option<u32>,
    /// Worker threads (default: all cores).
    #[arg(long)]
    workers: Option<usize>,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SolverKind {
    Mvt,
    Dmvt,
}

#[derive(Args)]
pub struct SolveArgs {
    #[arg(value_enum)]
    kind: SolverKind,
    /// Travel steps between patches.
    #[arg(long)]
    tau: u32,
    #[arg(long, default_value_t = 1.0)]
    gamma: f64,
    #[arg(long, default_value_t = forage_core::optimal::DEFAULT_HORIZON)]
    horizon: u32,
    /// Longest patch residence scanned.
    #[arg(long, default_value_t = forage_core::optimal::DEFAULT_MAX_STEPS)]
    t_max: u32,
    #[arg(long, default_value_t = 1.0 / 30.0)]
    n0: f64,
    #[arg(long, default_value_t = 0.01)]
    lambda: f64,
    /// Directory for the solution JSON and curve CSV.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
pub struct AnalyzeArgs {
    /// Glob matching episode logs, e.g. 'runs/logs/*.jsonl'.
    #[arg(long)]
    logs: String,
    #[arg(long)]
    out: PathBuf,
    /// Analyses to run, space or comma separated.
    #[arg(value_delimiter = ',', value_enum)]
    analyses: Vec<analyze::Analysis>,
    /// Run every analysis that applies to the logs.
    #[arg(long)]
    all: bool,
    /// Discount factor for the discounted-MVT gap; defaults to the agent's.
    #[arg(long)]
    gamma: Option<f64>,
    /// State coordinate used by the dynamics analyses.
    #[arg(long, default_value_t = 0)]
    state_index: usize,
    /// State coordinate used by the exit-minus-entry range regression.
    #[arg(long, default_value_t = 1)]
    range_index: usize,
    #[arg(long, default_value_t = 40)]
    window: usize,
    #[arg(long, default_value_t = 10)]
    margin: usize,
}

#[derive(Args)]
pub struct ReportArgs {
    /// Analysis directory written by `analyze`.
    #[arg(long)]
    dir: PathBuf,
    /// Where to put the SVGs (default: the analysis directory).
    #[arg(long)]
    out: Option<PathBuf>,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("FORAGE_LOG_LEVEL", "warn")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Simulate(a) => simulate::run(&a),
        Command::Solve(a) => solve::run(&a),
        Command::Analyze(a) => analyze::run(&a),
        Command::Report(a) => report::run(&a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
