mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;
use std::sync::atomic::{AtomicBool, Ordering};

use clap::{Args, Parser, Subcommand};
use thiserror::Error;

/// Set by the Ctrl-C handler; the search stops at its next expansion.
pub static CANCEL: AtomicBool = AtomicBool::new(false);

#[derive(Debug, Error)]
pub enum CliError {
    /// Bad flags, config or input files. Exit status 2.
    #[error("{0}")]
    Usage(String),
    /// Failure after inputs validated. Exit status 1.
    #[error("{0}")]
    Runtime(String),
}

impl CliError {
    pub fn usage(e: impl std::fmt::Display) -> Self {
        CliError::Usage(e.to_string())
    }

    pub fn runtime(e: impl std::fmt::Display) -> Self {
        CliError::Runtime(e.to_string())
    }
}

/// Retrosynthesis planning with Hopfield-attention template ranking.
#[derive(Debug, Parser)]
#[command(name = "mhnpath", version)]
pub struct Cli {
    /// JSON run configuration; command-line flags override its values.
    #[arg(long, env = "MHNPATH_CONFIG", global = true)]
    pub config: Option<PathBuf>,
    /// Log filter for stderr, e.g. warn, info, debug.
    #[arg(long, global = true)]
    pub log_level: Option<String>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Train a template prioritizer and write the model and history.
    Train(TrainArgs),
    /// Rank templates for one molecule.
    Rank(RankArgs),
    /// Plan routes for one target molecule.
    Search(SearchArgs),
    /// Compute template-prioritization metrics on labelled cases.
    Eval(EvalArgs),
    /// Extract a template library from atom-mapped reactions.
    Extract(ExtractArgs),
    /// Write a seeded random split of a training TSV or a scaffold split of a molecule list.
    Split(SplitArgs),
    /// Price catalog maintenance.
    #[command(subcommand)]
    Price(PriceCommand),
}

#[derive(Debug, Subcommand)]
pub enum PriceCommand {
    /// Fetch vendor quotes for catalog molecules.
    Sync(PriceSyncArgs),
}

/// Flags that locate a template library and its trained models.
#[derive(Debug, Args)]
pub struct RankerArgs {
    /// Template library TSV.
    #[arg(long)]
    pub library: Option<PathBuf>,
    /// Trained model file; repeat for an ensemble. Without one, every
    /// template is tried in library order.
    #[arg(long = "model")]
    pub models: Vec<PathBuf>,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// Training TSV with columns product_smiles and template_id.
    #[arg(long)]
    pub data: PathBuf,
    /// Template library TSV.
    #[arg(long)]
    pub library: Option<PathBuf>,
    /// Output directory for model.mhnp, history.csv and run.json.
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
    /// Seed for initialization, splitting, shuffling and dropout.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Training epochs.
    #[arg(long)]
    pub epochs: Option<usize>,
    /// AdamW learning rate.
    #[arg(long)]
    pub lr: Option<f64>,
    /// Minibatch size.
    #[arg(long)]
    pub batch_size: Option<usize>,
    /// Associative space width.
    #[arg(long)]
    pub d_assoc: Option<usize>,
    /// Molecule and template fingerprint width.
    #[arg(long)]
    pub fp_bits: Option<usize>,
    /// Hopfield inverse temperature.
    #[arg(long)]
    pub beta: Option<f64>,
    /// Dropout probability of hidden layers.
    #[arg(long)]
    pub dropout: Option<f64>,
}

#[derive(Debug, Args)]
pub struct RankArgs {
    /// Query molecule SMILES.
    pub smiles: String,
    #[command(flatten)]
    pub ranker: RankerArgs,
    /// Number of rows to print.
    #[arg(short = 'n', long, default_value_t = 10)]
    pub top_n: usize,
    /// Drop templates that fail the substructure screen.
    #[arg(long)]
    pub screen: bool,
}

#[derive(Debug, Args)]
pub struct SearchArgs {
    /// Target molecule SMILES.
    pub smiles: String,
    #[command(flatten)]
    pub ranker: RankerArgs,
    /// Enzymatic template library TSV.
    #[arg(long)]
    pub enz_library: Option<PathBuf>,
    /// Enzymatic model file; repeat for an ensemble.
    #[arg(long = "enz-model")]
    pub enz_models: Vec<PathBuf>,
    /// Price catalog CSV.
    #[arg(long)]
    pub catalog: Option<PathBuf>,
    /// Toxicity class CSV.
    #[arg(long)]
    pub toxicity: Option<PathBuf>,
    /// Reaction conditions table CSV.
    #[arg(long)]
    pub conditions: Option<PathBuf>,
    /// External condition predictor command speaking NDJSON on stdio.
    #[arg(long, conflicts_with = "conditions")]
    pub conditions_cmd: Option<String>,
    /// Output directory for tree.json, tree.dot, routes.tsv, search_log.csv and run.json.
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
    /// Weight of the cost score.
    #[arg(long)]
    pub w_cost: Option<f64>,
    /// Weight of the temperature score.
    #[arg(long)]
    pub w_temp: Option<f64>,
    /// Weight of the solvent score.
    #[arg(long)]
    pub w_solv: Option<f64>,
    /// Wall-clock budget in seconds.
    #[arg(long)]
    pub time_limit: Option<f64>,
    /// Maximum route length.
    #[arg(long)]
    pub max_depth: Option<usize>,
    /// Maximum number of node expansions.
    #[arg(long)]
    pub max_expansions: Option<usize>,
    /// Templates requested per prioritizer per expansion.
    #[arg(long)]
    pub top_n: Option<usize>,
    /// Stop after this many solved nodes.
    #[arg(long)]
    pub route_limit: Option<usize>,
    /// Skip the substructure screen.
    #[arg(long)]
    pub no_screen: bool,
    /// Write temperatures in Kelvin instead of Celsius.
    #[arg(long)]
    pub kelvin: bool,
    /// Seed recorded in the run manifest; the search itself is deterministic.
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    /// Cases TSV with columns product_smiles and template_id.
    #[arg(long)]
    pub cases: PathBuf,
    #[command(flatten)]
    pub ranker: RankerArgs,
    /// Output directory for metrics.csv, metrics.txt and run.json.
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
    /// Seed recorded in the run manifest.
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Args)]
pub struct ExtractArgs {
    /// Reaction TSV with columns reaction_smiles, source and optional enzyme_id.
    #[arg(long)]
    pub reactions: PathBuf,
    /// Environment radius around reaction centers.
    #[arg(long, default_value_t = 1)]
    pub radius: usize,
    /// Output template library TSV.
    #[arg(long)]
    pub out: PathBuf,
    /// Write rejected reactions here as line and reason.
    #[arg(long)]
    pub rejects: Option<PathBuf>,
}

#[derive(Debug, Args)]
#[command(group(clap::ArgGroup::new("input").required(true).args(["data", "molecules"])))]
pub struct SplitArgs {
    /// Training TSV with columns product_smiles and template_id; split
    /// 80:10:10 into train.tsv, val.tsv and test.tsv.
    #[arg(long)]
    pub data: Option<PathBuf>,
    /// Molecule list; scaffold split into part_0.smi, part_1.smi and so on.
    #[arg(long)]
    pub molecules: Option<PathBuf>,
    /// Number of scaffold partitions.
    #[arg(long, default_value_t = 3, requires = "molecules")]
    pub parts: usize,
    /// Output directory.
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
    /// Split seed; training with the same seed uses the same partition.
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Args)]
pub struct PriceSyncArgs {
    /// Price catalog CSV.
    #[arg(long)]
    pub catalog: Option<PathBuf>,
    /// Vendor base URL.
    #[arg(long)]
    pub endpoint: String,
    /// File of SMILES to quote, one per line; defaults to every catalog key.
    #[arg(long)]
    pub keys: Option<PathBuf>,
    /// Concurrent requests.
    #[arg(long, default_value_t = 4)]
    pub parallelism: usize,
    /// Per-request timeout in seconds.
    #[arg(long, default_value_t = 10.0)]
    pub timeout: f64,
    /// Merge quotes into the catalog file instead of only printing them.
    #[arg(long)]
    pub merge: bool,
    /// Write the merged catalog here instead of over the input.
    #[arg(long, requires = "merge")]
    pub out: Option<PathBuf>,
    /// Timestamp stamped on merged quotes; defaults to now in UTC.
    #[arg(long)]
    pub retrieved_at: Option<String>,
}

fn run(cli: Cli) -> Result<(), CliError> {
    let cfg = config::RunConfig::load(cli.config.as_deref())?;
    let level = cli.log_level.clone().or_else(|| cfg.log_level.clone()).unwrap_or_else(|| "info".into());
    env_logger::Builder::new().parse_filters(&level).init();
    match cli.command {
        Command::Train(a) => commands::train(&cfg, a),
        Command::Rank(a) => commands::rank(&cfg, a),
        Command::Search(a) => {
            ctrlc::set_handler(|| CANCEL.store(true, Ordering::SeqCst)).map_err(CliError::runtime)?;
            commands::search(&cfg, a)
        }
        Command::Eval(a) => commands::eval(&cfg, a),
        Command::Extract(a) => commands::extract(a),
        Command::Split(a) => commands::split(&cfg, a),
        Command::Price(PriceCommand::Sync(a)) => commands::price_sync(&cfg, a),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                CliError::Usage(_) => ExitCode::from(2),
                CliError::Runtime(_) => ExitCode::from(1),
            }
        }
    }
}
