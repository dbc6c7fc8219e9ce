//! `cys`: the recommendation pipeline, its individual stages, the consensus
//! simulators and the optimization benchmarks from the command line.

mod commands;
mod inputs;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use cyberswarm::ErrorClass;

#[derive(Parser, Debug)]
#[command(name = "cys", version, about = "Hypergraph social recommendation and consensus dynamics")]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Clone)]
pub struct Global {
    /// Flat `key = value` configuration file.
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,
    /// Global seed; overrides the configuration file.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads (default: available cores).
    #[arg(long, global = true)]
    pub workers: Option<usize>,
    /// Output directory. Without it the primary output goes to stdout.
    #[arg(long, global = true, value_name = "DIR")]
    pub out: Option<PathBuf>,
    /// Ratings file, `user item rating [timestamp]` per line.
    #[arg(long, global = true, value_name = "PATH")]
    pub ratings: Option<PathBuf>,
    /// Trust file, `source target [weight]` per line.
    #[arg(long, global = true, value_name = "PATH")]
    pub trust: Option<PathBuf>,
    /// Configuration override; repeatable.
    #[arg(long = "set", short = 's', global = true, value_name = "KEY=VALUE")]
    pub set: Vec<String>,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Threshold filter and anomaly exclusion; writes the kept ratings.
    Preprocess,
    /// Co-interaction hypergraph of the cleaned ratings.
    Hypergraph {
        /// Also build embeddings and add the co-preference hyperedges.
        #[arg(long)]
        with_co_preference: bool,
    },
    /// Degree, closeness and betweenness per user.
    Centrality,
    /// Random-walk embeddings per user.
    Embed(EmbedArgs),
    /// Message passing over the user graph.
    Propagate(PropagateArgs),
    /// Top-K items per user.
    Recommend(RecommendArgs),
    /// Hold-out evaluation against a popularity baseline.
    Evaluate,
    /// Grid of pipeline runs; writes one CSV row per cell.
    Sweep(SweepArgs),
    /// Consensus dynamics on a trust graph.
    SimulateDcse(DynamicsArgs),
    /// Consensus dynamics on a layered trust graph.
    SimulateCehs(CehsArgs),
    /// Multistart search on the benchmark functions.
    BenchFns(BenchArgs),
    /// The full pipeline with report and artifacts.
    Run,
    /// Brute-force reference values.
    #[command(hide = true)]
    Oracle(OracleArgs),
}

#[derive(Args, Debug)]
pub struct EmbedArgs {
    #[arg(long)]
    pub dim: Option<usize>,
    #[arg(long)]
    pub walk_len: Option<usize>,
    #[arg(long)]
    pub walks_per_node: Option<usize>,
    #[arg(long)]
    pub p: Option<f64>,
    #[arg(long)]
    pub q: Option<f64>,
    #[arg(long)]
    pub window: Option<usize>,
    #[arg(long)]
    pub negatives: Option<usize>,
    #[arg(long)]
    pub epochs: Option<usize>,
}

#[derive(Args, Debug)]
pub struct PropagateArgs {
    /// gat, gcn, gin or gin-sl.
    #[arg(long)]
    pub variant: Option<String>,
    #[arg(long)]
    pub layers: Option<usize>,
    /// Start from these features (`node v1 … vd`) instead of computing them.
    #[arg(long, value_name = "PATH")]
    pub features: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct RecommendArgs {
    /// euclidean, jaccard or cosine.
    #[arg(long)]
    pub metric: Option<String>,
    #[arg(long)]
    pub neighbors: Option<usize>,
    #[arg(long, default_value_t = 10)]
    pub topk: usize,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum Preset {
    Ablation,
    Lambda,
    BatchSize,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum Mode {
    Factorial,
    OneAtATime,
}

#[derive(Args, Debug)]
pub struct SweepArgs {
    /// `name=v1,v2,…`; repeatable.
    #[arg(long, value_name = "NAME=VALUES")]
    pub axis: Vec<String>,
    /// Predefined axes, used when no `--axis` is given.
    #[arg(long, value_enum, default_value_t = Preset::Ablation)]
    pub preset: Preset,
    #[arg(long, value_enum, default_value_t = Mode::OneAtATime)]
    pub mode: Mode,
}

#[derive(Args, Debug)]
pub struct DynamicsArgs {
    /// Influence arcs as `source target [weight]`: `target` influences
    /// `source`. Defaults to the trust file.
    #[arg(long, value_name = "PATH")]
    pub graph: Option<PathBuf>,
    /// Initial preferences, `node value` per line (default: seeded uniform).
    #[arg(long, value_name = "PATH")]
    pub p0: Option<PathBuf>,
    /// Centrality weights `degree:closeness:betweenness`.
    #[arg(long)]
    pub lambda: Option<String>,
    #[arg(long)]
    pub eta: Option<f64>,
    #[arg(long, default_value_t = cyberswarm::dynamics::DEFAULT_T_MAX)]
    pub t_max: usize,
    #[arg(long, default_value_t = cyberswarm::dynamics::DEFAULT_TOL)]
    pub tol: f64,
}

#[derive(Args, Debug)]
pub struct CehsArgs {
    #[command(flatten)]
    pub dynamics: DynamicsArgs,
    /// Layer of every node, `node layer` per line.
    #[arg(long, value_name = "PATH")]
    pub layers: PathBuf,
    /// Share of influence from other layers.
    #[arg(long, default_value_t = cyberswarm::dynamics::DEFAULT_RHO_V)]
    pub rho_v: f64,
}

#[derive(Args, Debug)]
pub struct BenchArgs {
    /// Function name; all of them when absent.
    #[arg(long = "fn", value_name = "NAME")]
    pub function: Option<String>,
    #[arg(long, default_value_t = 100)]
    pub restarts: usize,
    /// Evaluation budget per restart.
    #[arg(long, default_value_t = cyberswarm::benchfns::DEFAULT_BUDGET)]
    pub budget: usize,
    #[arg(long, default_value_t = 2)]
    pub dim: usize,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum OracleKind {
    Centrality,
    Equilibrium,
}

#[derive(Args, Debug)]
pub struct OracleArgs {
    #[arg(value_enum)]
    pub kind: OracleKind,
    #[arg(long, value_name = "PATH")]
    pub graph: PathBuf,
    #[arg(long)]
    pub lambda: Option<String>,
    #[arg(long)]
    pub eta: Option<f64>,
}

fn exit_code(e: &anyhow::Error) -> u8 {
    if let Some(err) = e.chain().find_map(|c| c.downcast_ref::<cyberswarm::Error>()) {
        return match err.class() {
            ErrorClass::Input => 1,
            ErrorClass::Numeric => 2,
            ErrorClass::Internal => 3,
        };
    }
    if e.chain().any(|c| c.is::<std::io::Error>()) {
        1
    } else {
        3
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match commands::dispatch(&cli.global, cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
