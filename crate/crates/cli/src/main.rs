mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use crate::config::Settings;

/// Kernel k-means clustering explained by axis-aligned interval trees.
#[derive(Debug, Parser)]
#[command(name = "kernel-tree", version, about)]
struct Cli {
    /// Flat `key = value` config file; flags take precedence.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Worker threads for parallel stages (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Increase log verbosity (-v info, -vv debug).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run kernel k-means and write labels plus a metrics record.
    Cluster(ClusterArgs),
    /// Cluster, then build an interpretable tree explaining the clustering.
    Explain(ExplainArgs),
    /// Grow a tree (or an empty one) to more leaves.
    Refine(RefineArgs),
    /// Cost, price and ARI of an existing tree.
    Evaluate(EvaluateArgs),
    /// Gamma search, explanation and refinement over the dataset suite.
    Benchmark(BenchmarkArgs),
    /// Write a synthetic dataset to CSV.
    Generate(GenerateArgs),
}

#[derive(Debug, Args)]
pub struct DataArgs {
    /// Input CSV.
    #[arg(long)]
    pub data: Option<PathBuf>,
    /// Ground-truth label column: index, header name, or `last`.
    #[arg(long)]
    pub label_column: Option<String>,
    /// Rescale every coordinate to [0, 1] (default false; true for benchmark).
    #[arg(long)]
    pub normalize: Option<bool>,
}

#[derive(Debug, Args)]
pub struct KernelArgs {
    /// gaussian, laplace, linear, quadratic, epsilon, hellinger, hik, chi2.
    #[arg(long)]
    pub kernel: Option<String>,
    /// Bandwidth of the gaussian and laplace kernels (default 1).
    #[arg(long)]
    pub gamma: Option<f64>,
    /// Radius of the epsilon kernel (default 1).
    #[arg(long)]
    pub epsilon: Option<f64>,
    /// Exponent of the hik kernel (default 1).
    #[arg(long)]
    pub beta: Option<f64>,
}

#[derive(Debug, Args)]
pub struct ClusterOpts {
    /// Number of clusters.
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
    pub k: Option<u64>,
    /// Random seed (default 0).
    #[arg(long)]
    pub seed: Option<u64>,
    /// Kernel k-means restarts; the lowest cost wins.
    #[arg(long)]
    pub restarts: Option<usize>,
    /// kpp or random.
    #[arg(long)]
    pub init: Option<String>,
    /// Lloyd iteration cap per restart.
    #[arg(long)]
    pub max_iter: Option<usize>,
}

#[derive(Debug, Args)]
pub struct OutputArgs {
    /// Directory for default output file names.
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
    /// Metrics file (line-delimited JSON).
    #[arg(long)]
    pub metrics: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ClusterArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub kernel: KernelArgs,
    #[command(flatten)]
    pub cluster: ClusterOpts,
    #[command(flatten)]
    pub output: OutputArgs,
    /// Labels CSV output.
    #[arg(long)]
    pub labels_out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct FeatureArgs {
    /// auto, taylor, distance, additive, raw.
    #[arg(long)]
    pub feature_mode: Option<String>,
    /// Taylor / chi-square expansion order.
    #[arg(long)]
    pub order: Option<usize>,
    /// Number of anchor points for distance features.
    #[arg(long)]
    pub anchors: Option<usize>,
    /// Threshold candidates: centers or exhaustive.
    #[arg(long)]
    pub candidates: Option<String>,
}

#[derive(Debug, Args)]
pub struct TreeOutputArgs {
    /// Tree JSON output.
    #[arg(long)]
    pub tree_out: Option<PathBuf>,
    /// Graphviz DOT output.
    #[arg(long)]
    pub dot_out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ExplainArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub kernel: KernelArgs,
    #[command(flatten)]
    pub cluster: ClusterOpts,
    #[command(flatten)]
    pub features: FeatureArgs,
    #[command(flatten)]
    pub output: OutputArgs,
    #[command(flatten)]
    pub trees: TreeOutputArgs,
    /// Reference labels CSV output.
    #[arg(long)]
    pub labels_out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct RefineArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub kernel: KernelArgs,
    #[command(flatten)]
    pub cluster: ClusterOpts,
    #[command(flatten)]
    pub output: OutputArgs,
    #[command(flatten)]
    pub trees: TreeOutputArgs,
    /// Tree JSON to extend.
    #[arg(long, conflicts_with = "empty")]
    pub tree: Option<PathBuf>,
    /// Start from a single leaf instead of a tree file.
    #[arg(long)]
    pub empty: bool,
    /// Reference labels CSV; kernel k-means is run when absent.
    #[arg(long)]
    pub reference: Option<PathBuf>,
    /// Target number of leaves.
    #[arg(long)]
    pub leaves: Option<usize>,
    /// exkmc or expand.
    #[arg(long)]
    pub objective: Option<String>,
    /// one_sided or interval.
    #[arg(long)]
    pub cuts: Option<String>,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub kernel: KernelArgs,
    #[command(flatten)]
    pub output: OutputArgs,
    /// Tree JSON to evaluate.
    #[arg(long)]
    pub tree: Option<PathBuf>,
    /// Reference labels CSV; its cost is the price baseline.
    #[arg(long)]
    pub reference: Option<PathBuf>,
    /// Random seed (default 0).
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Args)]
pub struct BenchmarkArgs {
    /// Directory holding the suite CSV files.
    #[arg(long)]
    pub data_dir: Option<PathBuf>,
    /// Comma-separated subset of pathbased,aggregation,flame,iris,cancer.
    #[arg(long)]
    pub datasets: Option<String>,
    /// Skip suite datasets whose file is missing instead of failing.
    #[arg(long)]
    pub skip_missing: bool,
    /// Rescale every coordinate to [0, 1] (default true).
    #[arg(long)]
    pub normalize: Option<bool>,
    /// Number of grid points (default 16).
    #[arg(long)]
    pub gamma_count: Option<usize>,
    /// Smallest grid exponent, base 2 (default -6).
    #[arg(long, allow_hyphen_values = true)]
    pub gamma_min_exp: Option<f64>,
    /// Largest grid exponent, base 2 (default 6).
    #[arg(long, allow_hyphen_values = true)]
    pub gamma_max_exp: Option<f64>,
    /// Random seed (default 0).
    #[arg(long)]
    pub seed: Option<u64>,
    /// Kernel k-means restarts; the lowest cost wins.
    #[arg(long)]
    pub restarts: Option<usize>,
    /// one_sided or interval cuts for the refinements.
    #[arg(long)]
    pub cuts: Option<String>,
    #[command(flatten)]
    pub features: FeatureArgs,
    /// Histogram-mixture draws (0 skips the experiment).
    #[arg(long)]
    pub chi2_draws: Option<usize>,
    /// Human-readable table output.
    #[arg(long)]
    pub table: Option<PathBuf>,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Args)]
pub struct GenerateArgs {
    /// halfmoons, exkmc, quadratic, epsilon, chi2, witnesses.
    #[arg(long)]
    pub kind: Option<String>,
    /// Number of points for halfmoons (default 200).
    #[arg(long)]
    pub n: Option<usize>,
    /// Gaussian noise for halfmoons (default 0.05).
    #[arg(long)]
    pub noise: Option<f64>,
    /// Random seed (default 0).
    #[arg(long)]
    pub seed: Option<u64>,
    /// Spread of the exkmc counterexample (default 0.01).
    #[arg(long)]
    pub eps: Option<f64>,
    /// Points per group in the exkmc counterexample (default 10).
    #[arg(long)]
    pub per_side: Option<usize>,
    /// Output CSV (witnesses writes two files with suffixes).
    #[arg(long)]
    pub out: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn run(cli: Cli) -> anyhow::Result<()> {
    let settings = match &cli.config {
        Some(path) => Settings::load(path)?,
        None => Settings::default(),
    };
    if let Some(threads) = settings.get("threads", cli.threads)? {
        rayon::ThreadPoolBuilder::new().num_threads(threads).build_global()?;
    }
    match cli.command {
        Command::Cluster(a) => commands::cluster(&settings, a),
        Command::Explain(a) => commands::explain(&settings, a),
        Command::Refine(a) => commands::refine(&settings, a),
        Command::Evaluate(a) => commands::evaluate(&settings, a),
        Command::Benchmark(a) => commands::benchmark(&settings, a),
        Command::Generate(a) => commands::generate(&settings, a),
    }
}
