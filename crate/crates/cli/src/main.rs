//! `dyco`: build dynamic instances, solve them, compute optima, and report.

mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

#[derive(Parser)]
#[command(name = "dyco", version, about = "Dynamic combinatorial optimization with instance-specific GNN solvers")]
struct Cli {
    /// Worker threads for repetitions, oracles and rounding (default: logical cores).
    #[arg(long, global = true)]
    jobs: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
#[allow(clippy::large_enum_variant)]
enum Command {
    /// Build a snapshot sequence and write it as instance JSON.
    Build(BuildArgs),
    /// Train on every snapshot with a warm-start strategy and write traces.
    Solve(SolveArgs),
    /// Compute (or load cached) optima for every snapshot of an instance.
    ///
    /// MaxCut above 26 nodes uses the best cut found by tabu search (reported as not exact);
    /// MIS above 128 and TSP above 18 nodes exit with code 3.
    Oracle(OracleArgs),
    /// Run the SDP perturbation experiments and write a lambda sweep CSV.
    Gwlab(GwlabArgs),
    /// Merge solve traces and oracle optima into ApR tables.
    Report(ReportArgs),
}

#[derive(Args)]
pub struct BuildArgs {
    /// maxcut builds growing snapshots, mis the same sequence reversed, tsp a moving-node sequence.
    #[arg(long)]
    problem: String,
    /// Temporal edge list (`u v [w [t]]`) for maxcut/mis, or a TSPLIB file for tsp.
    /// `builtin:burma14` selects the bundled TSPLIB instance.
    #[arg(long, conflicts_with = "random")]
    input: Option<PathBuf>,
    /// Synthetic Erdos-Renyi edge stream instead of --input, as `nodes,edges`.
    #[arg(long)]
    random: Option<String>,
    /// Seed for --random.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Number of snapshots T.
    #[arg(long, default_value_t = 10)]
    snapshots: usize,
    /// Fraction of edges added per step (maxcut/mis).
    #[arg(long, default_value_t = 0.1)]
    fraction: f64,
    /// Moving node start position `x,y` (tsp; defaults to the bundled trajectory with burma14).
    #[arg(long)]
    start: Option<String>,
    /// Moving node end position `x,y` (tsp).
    #[arg(long)]
    end: Option<String>,
    /// Keep EUC_2D distances continuous instead of rounding to integers (tsp).
    #[arg(long)]
    no_rounding: bool,
    /// Output path for the instance JSON.
    #[arg(long, short)]
    output: PathBuf,
}

#[derive(Args)]
pub struct SolveArgs {
    /// Instance JSON written by `dyco build`.
    #[arg(long)]
    instance: PathBuf,
    /// Schedule JSON; any field may be omitted. Flags override it.
    #[arg(long)]
    config: Option<PathBuf>,
    /// static, warm or sp.
    #[arg(long)]
    strategy: Option<String>,
    /// Tensors touched by shrink-and-perturb: emb, gnn or full.
    #[arg(long)]
    sp_subset: Option<String>,
    /// Epochs on the first snapshot.
    #[arg(long)]
    epoch_max: Option<usize>,
    /// Epochs on each later snapshot.
    #[arg(long)]
    epoch_ws: Option<usize>,
    /// Comma-separated, ascending epoch budgets for later snapshots (default: epoch-ws).
    #[arg(long, value_delimiter = ',')]
    budgets: Vec<usize>,
    /// Adam learning rate.
    #[arg(long)]
    lr: Option<f64>,
    /// Base seed; repetition r uses a seed derived from it.
    #[arg(long)]
    seed: Option<u64>,
    /// Independent repetitions.
    #[arg(long)]
    reps: Option<usize>,
    /// Graph convolution: gcn or sage.
    #[arg(long)]
    conv: Option<String>,
    /// Embedding initialization: uniform, U(-1/sqrt(d), 1/sqrt(d)), or normal, N(0, 1).
    #[arg(long)]
    embedding_init: Option<String>,
    /// Shrink coefficient, in (0, 1).
    #[arg(long)]
    lambda_shrink: Option<f64>,
    /// Perturb coefficient, in (0, 1).
    #[arg(long)]
    lambda_perturb: Option<f64>,
    /// Standard deviation of the perturbation noise.
    #[arg(long)]
    sigma: Option<f64>,
    /// Perturb with zeros instead of Gaussian noise.
    #[arg(long)]
    zero_noise: bool,
    /// Keep Adam moments of perturbed tensors instead of resetting them.
    #[arg(long)]
    keep_adam_state: bool,
    /// Reset all Adam moments between snapshots.
    #[arg(long)]
    fresh_adam: bool,
    /// Node embedding width.
    #[arg(long)]
    embedding_dim: Option<usize>,
    /// Hidden layer width.
    #[arg(long)]
    hidden_dim: Option<usize>,
    /// QUBO penalty for mis/tsp (problem default otherwise).
    #[arg(long)]
    penalty: Option<f64>,
    /// Rounding threshold for binary decoding.
    #[arg(long)]
    threshold: Option<f64>,
    /// Beam width for tour decoding; 1 is greedy.
    #[arg(long)]
    beam_width: Option<usize>,
    /// Decode the tour every K epochs and keep the best one.
    #[arg(long)]
    checkpoint_every: Option<usize>,
    /// Report the best checkpoint rather than the final epoch.
    #[arg(long)]
    best_checkpoint: bool,
    /// Also compute optima and fill the apr column (exit 3 if an oracle is out of capacity).
    #[arg(long)]
    apr: bool,
    /// Oracle cache file used with --apr.
    #[arg(long, requires = "apr")]
    oracle_cache: Option<PathBuf>,
    /// Output directory for trace.json and solve.csv.
    #[arg(long, default_value = ".")]
    out_dir: PathBuf,
}

#[derive(Args)]
pub struct OracleArgs {
    /// Instance JSON written by `dyco build`.
    #[arg(long)]
    instance: PathBuf,
    /// Cache file; created if missing, reused when it matches the instance.
    #[arg(long)]
    cache: PathBuf,
}

#[derive(Args)]
pub struct GwlabArgs {
    /// `cycle:N`, `complete:N`, or a path to an edge list.
    #[arg(long, default_value = "cycle:5")]
    graph: String,
    /// Starting point: ones, identity or sdp.
    #[arg(long, default_value = "ones")]
    x0: String,
    /// perturb rounds the projected point; warmstart re-solves the SDP from it first.
    #[arg(long, default_value = "perturb")]
    mode: String,
    /// Comma-separated perturbation scales.
    #[arg(long, value_delimiter = ',', default_value = "0,0.1,0.3,0.5,1.0")]
    lambdas: Vec<f64>,
    /// Perturbation draws per scale.
    #[arg(long, default_value_t = 200)]
    draws: usize,
    /// Rounding trials per draw.
    #[arg(long, default_value_t = 100)]
    trials: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output CSV path (stdout if omitted).
    #[arg(long, short)]
    output: Option<PathBuf>,
}

#[derive(Args)]
pub struct ReportArgs {
    /// Instance JSON the traces were produced from.
    #[arg(long)]
    instance: PathBuf,
    /// Oracle cache for the instance; missing entries are computed exactly.
    #[arg(long)]
    oracle: Option<PathBuf>,
    /// trace.json files written by `dyco solve`.
    #[arg(long, required = true, num_args = 1..)]
    traces: Vec<PathBuf>,
    /// Output directory for apr_mean.csv, apr_median.csv and per_snapshot.csv.
    #[arg(long, default_value = ".")]
    out_dir: PathBuf,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(j) = cli.jobs {
        if j == 0 {
            eprintln!("error: --jobs must be at least 1");
            return ExitCode::from(2);
        }
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(j).build_global() {
            eprintln!("error: {e}");
            return ExitCode::from(4);
        }
    }
    let result = match cli.command {
        Command::Build(a) => commands::build(a),
        Command::Solve(a) => commands::solve(a),
        Command::Oracle(a) => commands::oracle(a),
        Command::Gwlab(a) => commands::gwlab(a),
        Command::Report(a) => commands::report(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
