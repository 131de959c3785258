//! `rankrefine`: refine regression predictions with pairwise comparisons,
//! and run the simulation experiments that characterise the method.

mod commands;
mod csvio;
mod error;
mod http;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use rankrefine_experiments::{BENCHMARK_DIM, BENCHMARK_NOISE_SD, BENCHMARK_ROWS};

use crate::error::{usage, CliError};

#[derive(Parser)]
#[command(
    name = "rankrefine",
    version,
    about = "Refine regression predictions with pairwise rankings"
)]
#[command(
    after_help = "Exit codes: 0 success, 2 usage or validation error, 3 data error, 4 numeric failure, 5 network error.\n\
Set RANKREFINE_THREADS to limit worker threads; RUST_LOG controls log output."
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write the synthetic benchmark dataset as CSV.
    Synth(SynthArgs),
    /// Train a random forest and write `id,y_reg,var_reg` for new rows.
    Predict(PredictArgs),
    /// Fuse predictions with rank estimates from a comparisons file.
    Refine(RefineArgs),
    /// Collect pairwise comparisons from a ranker and write them as CSV.
    Rank(RankArgs),
    /// Oracle-ranker sweep over accuracy and number of comparisons.
    Sweep(SweepArgs),
    /// Monte-Carlo check of the error-reduction bound.
    ValidateBound(BoundArgs),
    /// Robustness of the fusion to noise in the rank variance.
    Noise(NoiseArgs),
    /// Paired comparison against the projection or RbR baseline.
    Baseline(BaselineArgs),
}

#[derive(Args)]
struct SynthArgs {
    #[arg(long, default_value_t = BENCHMARK_ROWS)]
    rows: usize,
    #[arg(long, default_value_t = BENCHMARK_DIM)]
    dim: usize,
    #[arg(long, default_value_t = BENCHMARK_NOISE_SD)]
    noise_sd: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output CSV; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Clone)]
struct ForestArgs {
    /// Trees in the forest.
    #[arg(long, default_value_t = 100)]
    trees: usize,
    /// Maximum tree depth (unlimited when absent).
    #[arg(long)]
    max_depth: Option<usize>,
    /// Minimum rows per leaf.
    #[arg(long, default_value_t = 1)]
    min_samples_leaf: usize,
    /// Features tried per split (all when absent).
    #[arg(long)]
    features_per_split: Option<usize>,
}

#[derive(Args)]
struct PredictArgs {
    /// Training CSV: optional `id` and `text`, feature columns, target `y`.
    #[arg(long)]
    train: PathBuf,
    /// Rows to predict; must contain the training feature columns.
    #[arg(long)]
    test: PathBuf,
    #[command(flatten)]
    forest: ForestArgs,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Also save the trained forest as JSON.
    #[arg(long)]
    save_model: Option<PathBuf>,
    /// Output CSV; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct RefineArgs {
    /// CSV with `id,y_reg,var_reg`.
    #[arg(long)]
    predictions: PathBuf,
    /// CSV with reference labels `id,y`.
    #[arg(long)]
    references: PathBuf,
    /// CSV with `query_id,ref_id,outcome` (1 = query above reference).
    #[arg(long)]
    comparisons: PathBuf,
    /// Floor the rank variance at this multiple of the regressor variance; 0 disables.
    #[arg(long, default_value_t = 0.0)]
    clamp_c: f64,
    /// Output CSV; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum Source {
    Oracle,
    File,
    Interactive,
    Llm,
}

#[derive(Args)]
struct RankArgs {
    #[arg(long, value_enum)]
    source: Source,
    /// Queries CSV: `id`, optional `text` and ground-truth `y`.
    #[arg(long)]
    queries: PathBuf,
    /// References CSV: `id`, optional `text` and `y`.
    #[arg(long)]
    references: PathBuf,
    /// Comparisons per query.
    #[arg(long, default_value_t = 20)]
    k: usize,
    /// Seed for reference sampling and oracle errors.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Oracle accuracy in [0.5, 1].
    #[arg(long, default_value_t = 1.0)]
    accuracy: f64,
    /// Recorded outcomes for `--source file`.
    #[arg(long)]
    comparisons: Option<PathBuf>,
    /// Property named in interactive prompts and LLM requests.
    #[arg(long)]
    property: Option<String>,
    /// LLM settings as JSON (endpoint_url, model_name, api_key_env_var, batch_size, ...).
    #[arg(long)]
    llm_config: Option<PathBuf>,
    /// Serve LLM replies from a recorded JSONL fixture instead of the network.
    #[arg(long)]
    replay: Option<PathBuf>,
    /// Record LLM exchanges to a JSONL fixture.
    #[arg(long)]
    record: Option<PathBuf>,
    /// Output CSV; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Clone)]
struct ExperimentArgs {
    /// Dataset CSV; the synthetic benchmark is used when absent.
    #[arg(long)]
    data: Option<PathBuf>,
    /// Synthetic benchmark rows.
    #[arg(long, default_value_t = BENCHMARK_ROWS)]
    rows: usize,
    /// Synthetic benchmark dimension.
    #[arg(long, default_value_t = BENCHMARK_DIM)]
    dim: usize,
    /// Synthetic benchmark noise standard deviation.
    #[arg(long, default_value_t = BENCHMARK_NOISE_SD)]
    noise_sd: f64,
    /// Seed of the synthetic benchmark.
    #[arg(long, default_value_t = 7)]
    data_seed: u64,
    /// Number of random re-splits.
    #[arg(long, default_value_t = 5)]
    seeds: usize,
    /// Rows used for training in each split.
    #[arg(long, default_value_t = 50)]
    train_size: usize,
    /// Rank-variance floor as a multiple of the regressor variance; 0 disables.
    #[arg(long, default_value_t = 0.0)]
    clamp_c: f64,
    /// Master seed for splits, forests, reference sampling and oracle errors.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[command(flatten)]
    forest: ForestArgs,
    /// Output CSV; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SweepArgs {
    #[command(flatten)]
    common: ExperimentArgs,
    /// Ranker accuracies as `start:step:end` or a comma list.
    #[arg(long, default_value = "0.50:0.05:1.00")]
    accuracies: String,
    /// Comparisons per query, comma separated.
    #[arg(long, default_value = "10,20,30")]
    ks: String,
}

#[derive(Args)]
struct BoundArgs {
    /// Target error ratios as a comma list or `start:step:end`.
    #[arg(long, default_value = "0.1,0.2,0.3,0.4,0.5,0.6,0.7,0.8,0.9,0.99")]
    alphas: String,
    #[arg(long, default_value_t = 1_000_000)]
    samples: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output CSV; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct NoiseArgs {
    #[command(flatten)]
    common: ExperimentArgs,
    /// Half-widths of the uniform perturbation.
    #[arg(long, default_value = "0,0.5,1,2,5,10")]
    bs: String,
    #[arg(long, default_value_t = 0.8)]
    accuracy: f64,
    #[arg(long, default_value_t = 20)]
    k: usize,
    /// Lower bound on perturbed variances.
    #[arg(long, default_value_t = 1e-6)]
    variance_floor: f64,
}

#[derive(Args)]
struct BaselineArgs {
    #[command(flatten)]
    common: ExperimentArgs,
    #[arg(long, value_parser = ["projection", "rbr"])]
    method: String,
    #[arg(long, default_value_t = 30)]
    k: usize,
    #[arg(long, default_value = "0.50:0.05:1.00")]
    accuracies: String,
}

fn configure_threads() -> Result<(), CliError> {
    let Ok(raw) = std::env::var("RANKREFINE_THREADS") else {
        return Ok(());
    };
    let n: usize = match raw.trim().parse() {
        Ok(n) if n > 0 => n,
        _ => return usage(format!("RANKREFINE_THREADS must be a positive integer, got `{raw}`")),
    };
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| CliError::Usage(e.to_string()))
}

fn run(cli: Cli) -> Result<(), CliError> {
    configure_threads()?;
    match cli.command {
        Command::Synth(a) => commands::synth(a),
        Command::Predict(a) => commands::predict(a),
        Command::Refine(a) => commands::refine_cmd(a),
        Command::Rank(a) => commands::rank(a),
        Command::Sweep(a) => commands::sweep(a),
        Command::ValidateBound(a) => commands::validate_bound_cmd(a),
        Command::Noise(a) => commands::noise(a),
        Command::Baseline(a) => commands::baseline(a),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
