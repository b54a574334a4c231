//! `gate`: simulate corpora, train GATE/reGATE models and run the
//! inference and evaluation procedures, writing CSV, SVG and a manifest.

mod commands;
mod config;
mod error;
mod manifest;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::error::CliError;

#[derive(Debug, Parser)]
#[command(name = "gate", version, about)]
struct Cli {
    /// TOML run configuration; defaults to the file named by GATE_CONFIG.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Mode {
    Gate,
    Regate,
}

/// Overrides for the `[model]` section.
#[derive(Debug, Clone, Default, Args)]
pub struct ModelFlags {
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub learning_rate: Option<f64>,
    #[arg(long)]
    pub batch_size: Option<usize>,
    #[arg(long)]
    pub latent_dim: Option<usize>,
    #[arg(long)]
    pub hidden: Option<usize>,
    #[arg(long)]
    pub k_nn: Option<usize>,
}

/// Overrides for the `[corpus]` section.
#[derive(Debug, Clone, Default, Args)]
pub struct CorpusFlags {
    #[arg(long)]
    pub node_count: Option<usize>,
    #[arg(long)]
    pub per_family: Option<usize>,
    #[arg(long)]
    pub trait_case: Option<u8>,
    /// Corpus seed.
    #[arg(long = "corpus-seed")]
    pub corpus_seed: Option<u64>,
    #[arg(long)]
    pub template_threshold: Option<f64>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Simulate the four-family corpus with traits and its template distances.
    Simulate {
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[command(flatten)]
        corpus: CorpusFlags,
    },
    /// Train a GATE or reGATE model on a corpus directory.
    Train {
        #[arg(long, value_enum, default_value = "regate")]
        mode: Mode,
        /// Corpus directory written by `simulate` (or laid out the same way).
        #[arg(long)]
        data: PathBuf,
        /// Distance matrix CSV; built from the corpus template when absent.
        #[arg(long)]
        distances: Option<PathBuf>,
        /// Output directory for the model, trace and distances.
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        model: ModelFlags,
        #[arg(long)]
        template_threshold: Option<f64>,
    },
    /// Posterior mean codes of every graph in a corpus.
    Embed {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Trait predictions of a supervised model.
    Predict {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Graphs from the prior, or conditional on a trait value.
    Generate {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        count: Option<usize>,
        /// Condition on this standardized trait value.
        #[arg(long, allow_negative_numbers = true)]
        y: Option<f64>,
        /// Also write the binarized conditional mean network.
        #[arg(long)]
        mean_network: bool,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Observed against prior-predictive summary distributions.
    Ppc {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        draws: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Conditional summary bands over a trait grid.
    Band {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
        y_grid: Option<Vec<f64>>,
        #[arg(long)]
        draws: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Largest mean differences between conditional networks at two traits.
    Diff {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, allow_negative_numbers = true)]
        y_low: Option<f64>,
        #[arg(long, allow_negative_numbers = true)]
        y_high: Option<f64>,
        /// Corpus whose trait quantiles give the two values when not set.
        #[arg(long)]
        data: Option<PathBuf>,
        #[arg(long)]
        draws: Option<usize>,
        #[arg(long)]
        top_k: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Cross-validated simulation study against the baselines.
    Eval {
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        corpus: CorpusFlags,
        #[command(flatten)]
        model: ModelFlags,
        #[arg(long)]
        folds: Option<usize>,
    },
}

fn run(argv: Vec<String>) -> Result<(), CliError> {
    let cli = Cli::try_parse_from(argv).map_err(|e| match e.kind() {
        clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => {
            let _ = e.print();
            CliError::Usage(String::new())
        }
        _ => CliError::Usage(e.render().to_string()),
    })?;
    let (config, config_path) = config::RunConfig::load(cli.config.as_deref())?;
    commands::dispatch(cli.command, config, config_path)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(std::env::args().collect()) {
        Ok(()) => ExitCode::SUCCESS,
        // help and version requests print themselves
        Err(CliError::Usage(msg)) if msg.is_empty() => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("gate: {e}");
            e.exit_code()
        }
    }
}
