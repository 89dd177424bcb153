//! `interdict`: generate instances, label them, train a model, evaluate it
//! and run the diagnostic suites.
//!
//! Exit codes: 0 success, 1 a check or criterion failed, 2 usage or I/O error.

mod commands;
mod io;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use io::Split;

#[derive(Parser, Debug)]
#[command(name = "interdict", version, about = "Learning-assisted network interdiction")]
pub struct Cli {
    /// Master seed. Every random choice is derived from it.
    #[arg(long, global = true, env = "INTERDICT_SEED", default_value_t = 0)]
    pub seed: u64,
    /// Worker threads for per-instance work (label, evaluate, compare).
    #[arg(long, global = true, default_value_t = 1)]
    pub jobs: usize,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Write random instances as JSON lines.
    Generate(GenerateArgs),
    /// Compute optimal interdictions for every instance.
    Label(LabelArgs),
    /// Train a model on the training split and write a checkpoint.
    Train(TrainArgs),
    /// Score strategies end to end against the labeled optimum.
    Evaluate(EvaluateArgs),
    /// Plain branch-and-bound versus predict-and-search incumbent curves.
    Compare(CompareArgs),
    /// Run property suites and report pass/fail.
    Diagnose(DiagnoseArgs),
    /// Print the reduced MILP of one instance as JSON.
    Milp(InspectArgs),
    /// Print the multipartite graph of one instance as JSON.
    Graph(GraphArgs),
    /// Print color refinement class counts for one instance.
    Wl(WlArgs),
    /// Solve one instance with branch-and-bound and with the oracle.
    Solve(SolveArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum KindArg {
    Spi,
    Mfi,
}

#[derive(Args, Debug)]
pub struct GenerateArgs {
    #[arg(long, value_enum)]
    pub kind: KindArg,
    #[arg(long)]
    pub count: usize,
    #[arg(long, default_value_t = 20)]
    pub nodes: usize,
    /// Probability that each ordered node pair becomes an edge.
    #[arg(long, default_value_t = 1.0)]
    pub density: f64,
    #[arg(long, default_value_t = 1.0)]
    pub cost_lo: f64,
    #[arg(long, default_value_t = 10.0)]
    pub cost_hi: f64,
    #[arg(long, default_value_t = 10.0)]
    pub capacity_lo: f64,
    #[arg(long, default_value_t = 60.0)]
    pub capacity_hi: f64,
    /// Interdiction delay for shortest-path instances; omit to use each
    /// edge's cost.
    #[arg(long)]
    pub delay: Option<f64>,
    /// Edge count for shortest-path instances, removal-cost budget for
    /// max-flow instances.
    #[arg(long, default_value_t = 15.0)]
    pub budget: f64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum LabelMethod {
    Oracle,
    Milp,
}

#[derive(Args, Debug)]
pub struct LabelArgs {
    #[arg(long)]
    pub instances: PathBuf,
    #[arg(long, value_enum, default_value_t = LabelMethod::Oracle)]
    pub method: LabelMethod,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ActivationArg {
    Tanh,
    Softplus,
}

#[derive(Args, Debug)]
pub struct TrainArgs {
    #[arg(long)]
    pub instances: PathBuf,
    #[arg(long)]
    pub labels: PathBuf,
    /// Checkpoint to write.
    #[arg(long)]
    pub out: PathBuf,
    /// Per-epoch loss history CSV.
    #[arg(long)]
    pub history: Option<PathBuf>,
    #[arg(long, default_value_t = 100)]
    pub epochs: usize,
    #[arg(long, default_value_t = 16)]
    pub batch_size: usize,
    #[arg(long, default_value_t = 1e-4)]
    pub lr: f64,
    #[arg(long, default_value_t = 2)]
    pub layers: usize,
    #[arg(long, default_value_t = 64)]
    pub embed_dim: usize,
    /// Hidden widths shared by every MLP, comma separated; empty for none.
    #[arg(long, value_delimiter = ',', default_value = "64")]
    pub hidden: Vec<usize>,
    #[arg(long, default_value_t = 0)]
    pub random_dim: usize,
    #[arg(long, value_enum, default_value_t = ActivationArg::Tanh)]
    pub activation: ActivationArg,
    /// Separate constraint-to-variable message functions.
    #[arg(long)]
    pub separate_messages: bool,
    /// Train on every instance instead of the training split.
    #[arg(long)]
    pub all: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum StrategyArg {
    Model,
    Random,
    Oracle,
}

#[derive(Args, Debug)]
pub struct EvaluateArgs {
    #[arg(long)]
    pub instances: PathBuf,
    #[arg(long)]
    pub labels: PathBuf,
    /// Required for the model strategy.
    #[arg(long)]
    pub checkpoint: Option<PathBuf>,
    #[arg(long, value_enum, value_delimiter = ',', default_value = "model,random")]
    pub strategy: Vec<StrategyArg>,
    #[arg(long, value_enum, default_value_t = Split::Test)]
    pub split: Split,
    /// Directory for `<strategy>.json` and `<strategy>.csv` reports.
    #[arg(long)]
    pub out_dir: PathBuf,
}

#[derive(Args, Debug)]
pub struct CompareArgs {
    #[arg(long)]
    pub instances: PathBuf,
    #[arg(long)]
    pub checkpoint: PathBuf,
    #[arg(long)]
    pub k0: usize,
    #[arg(long)]
    pub k1: usize,
    #[arg(long)]
    pub delta: usize,
    #[arg(long, default_value_t = 10_000)]
    pub time_limit_ms: u64,
    #[arg(long, value_enum, default_value_t = Split::Test)]
    pub split: Split,
    /// Directory for one `<id>.csv` incumbent log per instance and a summary.
    #[arg(long)]
    pub out_dir: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Suite {
    Wl,
    Duality,
    Gradcheck,
    OracleVsMilp,
    All,
}

#[derive(Args, Debug)]
pub struct DiagnoseArgs {
    #[arg(long, value_enum, value_delimiter = ',', default_value = "all")]
    pub suite: Vec<Suite>,
    /// Check gradients of this model instead of freshly initialized ones.
    #[arg(long)]
    pub checkpoint: Option<PathBuf>,
    /// Scale factor on the number of cases each suite runs.
    #[arg(long, default_value_t = 1.0)]
    pub scale: f64,
    /// Write the suite reports as JSON here.
    #[arg(long)]
    pub report: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct InspectArgs {
    /// JSON-lines instance file.
    #[arg(long)]
    pub instances: PathBuf,
    /// Zero-based line among non-empty lines.
    #[arg(long, default_value_t = 0)]
    pub index: usize,
}

#[derive(Args, Debug)]
pub struct GraphArgs {
    #[command(flatten)]
    pub inspect: InspectArgs,
    #[arg(long, default_value_t = 0)]
    pub random_dim: usize,
}

#[derive(Args, Debug)]
pub struct WlArgs {
    #[command(flatten)]
    pub inspect: InspectArgs,
    #[arg(long, default_value_t = 3)]
    pub rounds: usize,
    /// Second instance to test for distinguishability.
    #[arg(long)]
    pub other: Option<usize>,
}

#[derive(Args, Debug)]
pub struct SolveArgs {
    #[command(flatten)]
    pub inspect: InspectArgs,
    #[arg(long)]
    pub node_limit: Option<usize>,
    #[arg(long)]
    pub time_limit_ms: Option<u64>,
    /// Incumbent log CSV.
    #[arg(long)]
    pub incumbents: Option<PathBuf>,
}

/// A command either finishes (with checks passing or not) or fails.
pub enum Outcome {
    Success,
    ChecksFailed,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let pool = match rayon::ThreadPoolBuilder::new().num_threads(cli.jobs.max(1)).build() {
        Ok(p) => p,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    };
    match pool.install(|| commands::run(&cli)) {
        Ok(Outcome::Success) => ExitCode::SUCCESS,
        Ok(Outcome::ChecksFailed) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
