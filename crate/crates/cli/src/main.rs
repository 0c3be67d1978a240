//! `verispace`: batch entry points of the verification strategy engine.
//!
//! Every command writes its artifacts into `--out-dir` and prints a JSON
//! summary on stdout. Artifacts depend only on the flags and `--seed`; the
//! `VERISPACE_WORKERS` environment variable sets the worker count and never
//! changes a result. The wall-time column of `compare` is the one exception
//! and can be blanked with `--no-timing`.
//!
//! Exit codes: 0 ok, 2 configuration error, 3 infeasible, 4 internal. Errors
//! are written to stderr as `{"error": {"code", "message"}}`.

mod commands;
mod error;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use error::CliError;

#[derive(Parser)]
#[command(
    name = "verispace",
    version,
    about = "Dynamic verification strategy design"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write a preset or random Noisy-OR network (and preset costs).
    GenNetwork(GenNetworkArgs),
    /// Search the best foresight tree from one state.
    Fvt(FvtArgs),
    /// Build the hindsight tree over all reachable states.
    Explore(ExploreArgs),
    /// Compare strategy design methods across rework rules.
    Compare(CompareArgs),
    /// Root value as a function of the convergence length.
    Sweep(SweepArgs),
    /// Report the temperature ladder and its admissible gap interval.
    Ladder(LadderArgs),
    /// Run the HTTP session service.
    Serve(ServeArgs),
}

#[derive(Args, Clone)]
pub struct ScenarioArgs {
    /// Bundled scenario: exemplar or satellite-{small,medium,large,full}.
    /// Used when no network file is given.
    #[arg(long, default_value = "satellite-medium")]
    pub preset: String,
    /// Network JSON file; replaces the preset.
    #[arg(long, requires = "costs")]
    pub network: Option<PathBuf>,
    /// Cost JSON file `{revenue, activities, penalty}`.
    #[arg(long, requires = "network")]
    pub costs: Option<PathBuf>,
    /// Rework rule name, looked up in --rules-file first.
    #[arg(long, default_value = "Low")]
    pub rule: String,
    /// Rule JSON file `{name: [H_l, ...]}`.
    #[arg(long)]
    pub rules_file: Option<PathBuf>,
    /// Number of verification intervals T.
    #[arg(long, default_value_t = 5)]
    pub horizon: usize,
}

#[derive(Args, Clone)]
pub struct SearchArgs {
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Replica count; truncates or extends the ladder.
    #[arg(long)]
    pub replicas: Option<usize>,
    /// Iterations per window.
    #[arg(long, default_value_t = 50)]
    pub nit: usize,
    /// Convergence length, a multiple of --nit.
    #[arg(long = "L", default_value_t = 1000)]
    pub convergence_length: usize,
    /// `reference`, `geometric`, `geometric:<base>` or a comma-separated list.
    #[arg(long, default_value = "reference")]
    pub ladder: String,
    #[arg(long, default_value_t = 1_000_000)]
    pub max_iterations: usize,
}

#[derive(Args, Clone)]
pub struct OutArgs {
    #[arg(long, default_value = ".")]
    pub out_dir: PathBuf,
}

#[derive(Args)]
pub struct GenNetworkArgs {
    /// Preset to write; without it a random network is generated.
    #[arg(long)]
    pub preset: Option<String>,
    #[arg(long, default_value_t = 3)]
    pub parameters: usize,
    #[arg(long, default_value_t = 5)]
    pub activities: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[command(flatten)]
    pub out: OutArgs,
}

#[derive(Args)]
pub struct FvtArgs {
    #[command(flatten)]
    pub scenario: ScenarioArgs,
    #[command(flatten)]
    pub search: SearchArgs,
    /// Per-activity results in scope order: 0 unverified, 1 pass, -1 fail.
    #[arg(long, allow_hyphen_values = true)]
    pub state: Option<String>,
    /// Elapsed intervals; defaults to the number of verified activities.
    #[arg(long)]
    pub t: Option<usize>,
    #[command(flatten)]
    pub out: OutArgs,
}

#[derive(Clone, Copy, Debug, clap::ValueEnum)]
pub enum OptimizerKind {
    Pt,
    Mc,
    Exhaustive,
}

#[derive(Args)]
pub struct ExploreArgs {
    #[command(flatten)]
    pub scenario: ScenarioArgs,
    #[command(flatten)]
    pub search: SearchArgs,
    /// Per-state optimizer.
    #[arg(long, value_enum, default_value = "pt")]
    pub optimizer: OptimizerKind,
    #[command(flatten)]
    pub out: OutArgs,
}

#[derive(Args)]
pub struct CompareArgs {
    #[command(flatten)]
    pub scenario: ScenarioArgs,
    #[command(flatten)]
    pub search: SearchArgs,
    /// Comma-separated subset of pta,fp,mc,dmc,sfvt.
    #[arg(long, default_value = "pta,fp,mc,dmc,sfvt")]
    pub methods: String,
    /// Rules to compare, comma-separated; `all` for the four bundled rules.
    /// Overrides --rule.
    #[arg(long)]
    pub rules: Option<String>,
    /// Largest number of fixed sequences FP may enumerate.
    #[arg(long, default_value_t = 5_000_000)]
    pub fp_budget: u64,
    /// Leave the wall-time column empty so output is reproducible.
    #[arg(long)]
    pub no_timing: bool,
    #[command(flatten)]
    pub out: OutArgs,
}

#[derive(Args)]
pub struct SweepArgs {
    #[command(flatten)]
    pub scenario: ScenarioArgs,
    #[command(flatten)]
    pub search: SearchArgs,
    /// Grid spacing of the swept convergence lengths.
    #[arg(long, default_value_t = 50)]
    pub step: usize,
    /// Largest swept convergence length.
    #[arg(long, default_value_t = 1000)]
    pub max: usize,
    #[command(flatten)]
    pub out: OutArgs,
}

#[derive(Args)]
pub struct LadderArgs {
    #[command(flatten)]
    pub search: SearchArgs,
    #[arg(long, default_value_t = 0.05)]
    pub c1: f64,
    #[arg(long, default_value_t = 0.05)]
    pub c2: f64,
    #[arg(long, default_value_t = 2.0)]
    pub c3: f64,
    #[arg(long, default_value_t = 3.8e5)]
    pub delta_e_max: f64,
    #[arg(long, default_value_t = 100.0)]
    pub delta_e_thres: f64,
}

#[derive(Args)]
pub struct ServeArgs {
    #[arg(long, default_value = "127.0.0.1:8080")]
    pub addr: String,
    /// Directory of session event logs; memory-only without it.
    #[arg(long)]
    pub data_dir: Option<PathBuf>,
}

fn configure_workers() -> Result<(), CliError> {
    let Ok(raw) = std::env::var("VERISPACE_WORKERS") else {
        return Ok(());
    };
    let n: usize = raw.parse().ok().filter(|&n| n > 0).ok_or_else(|| {
        CliError::config(
            "invalid_config",
            format!("VERISPACE_WORKERS=`{raw}` is not a positive integer"),
        )
    })?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| CliError::internal(e.to_string()))
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => e.exit(),
        Err(e) => return CliError::config("usage", e.to_string().trim_end()).report(),
    };
    let result = configure_workers().and_then(|()| match cli.command {
        Command::GenNetwork(a) => commands::gen_network(&a),
        Command::Fvt(a) => commands::fvt(&a),
        Command::Explore(a) => commands::explore(&a),
        Command::Compare(a) => commands::compare(&a),
        Command::Sweep(a) => commands::sweep(&a),
        Command::Ladder(a) => commands::ladder(&a),
        Command::Serve(a) => commands::serve(&a),
    });
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => e.report(),
    }
}
