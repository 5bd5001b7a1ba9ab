//! `svga`: train the estimator, write estimates, and evaluate them.

mod commands;
mod run_dir;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::parser::ValueSource;
use clap::{ArgAction, Args, CommandFactory, FromArgMatches, Parser, Subcommand};
use svga_core::{Reduction, TrainConfig, ValMetric, Variant};

/// Missing node-feature estimation on partially observed graphs.
#[derive(Debug, Parser)]
#[command(name = "svga", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Train a model and write a run directory.
    Train(TrainArgs),
    /// Write feature estimates from a trained run or the NeighAgg baseline.
    Estimate(EstimateArgs),
    /// Compute the metrics report of an estimate file or a run directory.
    Evaluate(EvaluateArgs),
    /// Cross-validated node classification on estimated features.
    Classify(ClassifyArgs),
    /// Train the det, noreg and stoch variants with identical seeds.
    Ablate(AblateArgs),
    /// Search the hyperparameter grid and report the best validation config.
    Grid(GridArgs),
    /// Time inference on random edge subsamples and fit time against edges.
    Bench(BenchArgs),
    /// Write a synthetic citation-like dataset (edges, features, labels).
    Synth(SynthArgs),
}

#[derive(Debug, Clone, Args)]
struct DataArgs {
    /// Edge list (`u<TAB>v` per line).
    #[arg(long)]
    edges: PathBuf,
    /// Feature file (header `n<TAB>m<TAB>kind`).
    #[arg(long)]
    features: PathBuf,
    /// Optional label file (`i<TAB>class` per line).
    #[arg(long)]
    labels: Option<PathBuf>,
    /// Seed of the 4:1:5 train/validation/test split.
    #[arg(long, default_value_t = 0)]
    split_seed: u64,
    /// Fraction of all nodes whose labels are observed in training.
    #[arg(long, default_value_t = 0.0)]
    label_ratio: f64,
}

#[derive(Debug, Clone, Args)]
struct ModelArgs {
    /// Latent dimension d.
    #[arg(long, default_value_t = 256)]
    dim: usize,
    /// Weight of the GMRF regularizer (det variant only).
    #[arg(long, default_value_t = 1.0)]
    lambda: f64,
    /// Variance scale of the structured covariance.
    #[arg(long, default_value_t = 1.0)]
    beta: f64,
    /// Weight of the log-determinant term.
    #[arg(long, default_value_t = 0.5)]
    alpha_logdet: f64,
    /// Dropout on the hidden encoder layer.
    #[arg(long, default_value_t = 0.5)]
    dropout: f64,
    /// Adam learning rate.
    #[arg(long, default_value_t = 0.001)]
    lr: f64,
    /// Maximum number of epochs.
    #[arg(long, default_value_t = 2000)]
    epochs: usize,
    /// Epochs without validation improvement before stopping.
    #[arg(long, default_value_t = 100)]
    patience: usize,
    /// Inference variant: det, stoch or noreg.
    #[arg(long, default_value_t = Variant::Det)]
    variant: Variant,
    /// Rank of the covariance factor (stoch); defaults to dim.
    #[arg(long)]
    rank: Option<usize>,
    /// Project embeddings onto the unit sphere.
    #[arg(long, default_value_t = true, action = ArgAction::Set)]
    unit_norm: bool,
    /// Validation metric (recall@K, ndcg@K, neg_rmse, corr, accuracy); defaults by feature kind.
    #[arg(long)]
    val_metric: Option<ValMetric>,
    /// Loss reduction over nodes: sum or mean.
    #[arg(long, default_value = "sum", value_parser = parse_reduction)]
    reduction: Reduction,
    /// Seed for initialization, dropout and sampling.
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

fn parse_reduction(s: &str) -> Result<Reduction, String> {
    match s {
        "sum" => Ok(Reduction::Sum),
        "mean" => Ok(Reduction::Mean),
        other => Err(format!("unknown reduction `{other}` (sum or mean)")),
    }
}

impl ModelArgs {
    fn config(&self) -> TrainConfig {
        TrainConfig {
            dim: self.dim,
            dropout: self.dropout,
            lambda: self.lambda,
            beta: self.beta,
            alpha_logdet: self.alpha_logdet,
            lr: self.lr,
            max_epochs: self.epochs,
            patience: self.patience,
            variant: self.variant,
            unit_norm: self.unit_norm,
            rank: self.rank,
            seed: self.seed,
            val_metric: self.val_metric,
            reduction: self.reduction,
            alpha_ber: None,
            track_curves: false,
        }
    }
}

#[derive(Debug, Args)]
struct TrainArgs {
    #[command(flatten)]
    data: DataArgs,
    #[command(flatten)]
    model: ModelArgs,
    /// Ks of the ranking metrics.
    #[arg(long, value_delimiter = ',', default_value = "10,20,50")]
    ks: Vec<usize>,
    /// Also write the estimates of every node to the run directory.
    #[arg(long)]
    write_xhat: bool,
    /// Run directory to create.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
enum Method {
    Svga,
    Neighagg,
}

#[derive(Debug, Args)]
struct EstimateArgs {
    /// Estimator to use.
    #[arg(long, value_enum, default_value_t = Method::Svga)]
    method: Method,
    /// Run directory of a trained model (svga).
    #[arg(long, required_if_eq("method", "svga"))]
    run: Option<PathBuf>,
    /// Edge list (neighagg).
    #[arg(long, required_if_eq("method", "neighagg"))]
    edges: Option<PathBuf>,
    /// Feature file with the observed rows (neighagg).
    #[arg(long, required_if_eq("method", "neighagg"))]
    features: Option<PathBuf>,
    /// Split seed deciding which rows are observed (neighagg).
    #[arg(long, default_value_t = 0)]
    split_seed: u64,
    /// Neighborhood hops for neighagg (1 or 2).
    #[arg(long, default_value_t = 1)]
    hops: usize,
    /// Nodes to write: all, train, val, test, or a file of node ids.
    #[arg(long, default_value = "all")]
    nodes: String,
    /// Output path for the dense estimate file.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct EvaluateArgs {
    /// Run directory; recomputes its metrics report.
    #[arg(long, conflicts_with_all = ["xhat", "features"])]
    run: Option<PathBuf>,
    /// Estimate file (rows for all nodes, or the ids in `<xhat>.ids`).
    #[arg(long, requires = "features")]
    xhat: Option<PathBuf>,
    /// Ground-truth feature file.
    #[arg(long)]
    features: Option<PathBuf>,
    /// Split seed used to select the evaluated nodes.
    #[arg(long, default_value_t = 0)]
    split_seed: u64,
    /// Nodes to evaluate: all, train, val, test, or a file of node ids.
    #[arg(long, default_value = "test")]
    nodes: String,
    /// Ks of the ranking metrics.
    #[arg(long, value_delimiter = ',', default_value = "10,20,50")]
    ks: Vec<usize>,
    /// Write the report here instead of standard output.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct ClassifyArgs {
    /// Estimate file (rows for all nodes, or the ids in `<xhat>.ids`).
    #[arg(long)]
    xhat: PathBuf,
    /// Label file.
    #[arg(long)]
    labels: PathBuf,
    /// Edge list; required for the gcn classifier.
    #[arg(long)]
    edges: Option<PathBuf>,
    /// Classifier: mlp or gcn.
    #[arg(long, default_value = "mlp")]
    classifier: svga_core::classify::Classifier,
    /// Split seed used to select the evaluated nodes.
    #[arg(long, default_value_t = 0)]
    split_seed: u64,
    /// Nodes to classify: all, train, val, test, or a file of node ids.
    #[arg(long, default_value = "test")]
    nodes: String,
    /// Number of cross-validation folds.
    #[arg(long, default_value_t = 5)]
    folds: usize,
    /// Seed of the fold partition and classifier.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Write the result here instead of standard output.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct AblateArgs {
    #[command(flatten)]
    data: DataArgs,
    #[command(flatten)]
    model: ModelArgs,
    /// Seeds to repeat every variant with.
    #[arg(long, value_delimiter = ',', default_value = "0")]
    seeds: Vec<u64>,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct GridArgs {
    #[command(flatten)]
    data: DataArgs,
    #[command(flatten)]
    model: ModelArgs,
    /// Parallel training runs.
    #[arg(long, default_value_t = 1)]
    workers: usize,
    /// Output file for the grid results.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct BenchArgs {
    /// Edge list.
    #[arg(long)]
    edges: PathBuf,
    /// Feature file (only its shape is used).
    #[arg(long)]
    features: PathBuf,
    #[command(flatten)]
    model: ModelArgs,
    /// Keep only the endpoints of the sampled edges instead of every node.
    #[arg(long)]
    induced: bool,
    /// Timed passes per subgraph.
    #[arg(long, default_value_t = 10)]
    repeats: usize,
    /// Output file for the timing rows and the fit.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
enum Preset {
    /// 300 nodes, 4 classes, 120 binary features.
    Small,
    /// Pubmed-sized: 19717 nodes, 44324 edges, 500 continuous features.
    Pubmed,
}

#[derive(Debug, Args)]
struct SynthArgs {
    /// Size preset.
    #[arg(long, value_enum, default_value_t = Preset::Small)]
    preset: Preset,
    /// Generator seed.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output directory for edges.tsv, features.tsv and labels.tsv.
    #[arg(long)]
    out: PathBuf,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let matches = Cli::command().get_matches();
    let cli = match Cli::from_arg_matches(&matches) {
        Ok(c) => c,
        Err(e) => e.exit(),
    };
    let lambda_given = matches
        .subcommand()
        .and_then(|(_, sub)| sub.try_get_raw("lambda").ok().flatten().map(|_| sub.value_source("lambda")))
        .flatten()
        == Some(ValueSource::CommandLine);

    let result = match cli.command {
        Command::Train(a) => commands::train(a, lambda_given),
        Command::Estimate(a) => commands::estimate(a),
        Command::Evaluate(a) => commands::evaluate(a),
        Command::Classify(a) => commands::classify(a),
        Command::Ablate(a) => commands::ablate(a),
        Command::Grid(a) => commands::grid(a),
        Command::Bench(a) => commands::bench(a),
        Command::Synth(a) => commands::synth(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {:#}", f.error);
            ExitCode::from(f.code)
        }
    }
}
