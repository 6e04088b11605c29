mod commands;
mod manifest;
mod plot;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use fairgraph::graph::PartitionBasis;
use fairgraph::metrics::AdgMode;

#[derive(Parser)]
#[command(
    name = "fairgraph",
    version,
    about = "Degree-fair node classification and fairness audits"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write a synthetic power-law graph with degree-biased features.
    Generate(GenerateArgs),
    /// Train on a dataset; writes the best checkpoint, epoch log and manifest.
    Train(TrainArgs),
    /// Classify test nodes and write accuracy and fairness reports.
    Evaluate(EvaluateArgs),
    /// Train and evaluate the full model and its three ablations over seeds.
    Ablate(AblateArgs),
}

#[derive(Args)]
pub struct GenerateArgs {
    #[arg(long)]
    pub n: usize,
    #[arg(long, default_value_t = 2.5)]
    pub gamma: f64,
    #[arg(long, default_value_t = 0.8)]
    pub bias: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 4)]
    pub classes: usize,
    #[arg(long, default_value_t = 16)]
    pub feature_dim: usize,
    #[arg(long, default_value_t = 0.7)]
    pub homophily: f64,
    #[arg(long, default_value_t = 2.0)]
    pub noise: f64,
    #[arg(long)]
    pub out: PathBuf,
    /// Replace an existing output directory.
    #[arg(long)]
    pub force: bool,
}

/// Training settings. Each flag overrides the key of the same name in
/// `--config`.
#[derive(Args, Clone, Default)]
pub struct ConfigArgs {
    /// `key = value` file with training keys.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub lambda1: Option<f64>,
    #[arg(long)]
    pub lambda2: Option<f64>,
    #[arg(long)]
    pub alpha: Option<f64>,
    #[arg(long)]
    pub ema: Option<f64>,
    #[arg(long)]
    pub tau: Option<f64>,
    /// Positives per node, or `all`.
    #[arg(long)]
    pub neighbors: Option<String>,
    #[arg(long)]
    pub kneg: Option<usize>,
    /// Degree groups of the balanced loss and of the reports.
    #[arg(long)]
    pub groups: Option<usize>,
    /// `joint` or `probe`.
    #[arg(long)]
    pub classifier: Option<String>,
}

#[derive(Args)]
pub struct TrainArgs {
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub force: bool,
    #[command(flatten)]
    pub config: ConfigArgs,
}

#[derive(Clone, Copy, ValueEnum)]
pub enum BasisArg {
    Degree,
    Centrality,
}

impl BasisArg {
    pub fn basis(self) -> PartitionBasis {
        match self {
            BasisArg::Degree => PartitionBasis::DegreeQuantile,
            BasisArg::Centrality => PartitionBasis::EigenvectorCentralityQuantile,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
pub enum ModeArg {
    Kde,
    Exact,
}

impl ModeArg {
    pub fn mode(self) -> AdgMode {
        match self {
            ModeArg::Kde => AdgMode::Kde,
            ModeArg::Exact => AdgMode::Exact,
        }
    }
}

#[derive(Args)]
pub struct EvaluateArgs {
    #[arg(long)]
    pub data: PathBuf,
    /// Checkpoint written by `train`.
    #[arg(long)]
    pub checkpoint: Option<PathBuf>,
    /// `node label` lines used instead of a checkpoint's predictions.
    #[arg(long)]
    pub predictions: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub force: bool,
    /// Restrict the report to one partition basis.
    #[arg(long, value_enum)]
    pub basis: Option<BasisArg>,
    /// Restrict the report to one gap mode.
    #[arg(long, value_enum)]
    pub mode: Option<ModeArg>,
    #[command(flatten)]
    pub config: ConfigArgs,
}

#[derive(Args)]
pub struct AblateArgs {
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub force: bool,
    /// Comma-separated training seeds.
    #[arg(long, value_delimiter = ',', default_value = "0")]
    pub seeds: Vec<u64>,
    #[arg(long, value_enum, default_value = "centrality")]
    pub basis: BasisArg,
    #[arg(long, value_enum, default_value = "kde")]
    pub mode: ModeArg,
    /// Also write `ablation.svg`.
    #[arg(long)]
    pub plot: bool,
    #[command(flatten)]
    pub config: ConfigArgs,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Generate(a) => commands::generate(&a),
        Command::Train(a) => commands::train(&a),
        Command::Evaluate(a) => commands::evaluate(&a),
        Command::Ablate(a) => commands::ablate(&a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
