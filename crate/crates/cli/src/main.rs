mod commands;
mod config;
mod corpus;
mod manifest;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use litcoref::model::ClusteringStrategy;

/// Coreference resolution for long literary documents.
#[derive(Debug, Parser)]
#[command(name = "litcoref", version, about)]
pub struct Cli {
    /// TOML configuration file; defaults to $LITCOREF_CONFIG.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Worker threads for document-level parallelism; 1 gives
    /// byte-reproducible runs, 0 uses every core.
    #[arg(long, global = true, default_value_t = 0)]
    pub jobs: usize,
    /// Overrides every seed in the configuration.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Where to write the run manifest.
    #[arg(long, global = true)]
    pub manifest: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum StrategyArg {
    LeftToRight,
    EasyFirstGlobal,
}

impl From<StrategyArg> for ClusteringStrategy {
    fn from(s: StrategyArg) -> Self {
        match s {
            StrategyArg::LeftToRight => ClusteringStrategy::LeftToRight,
            StrategyArg::EasyFirstGlobal => ClusteringStrategy::EasyFirstGlobal,
        }
    }
}

#[derive(Debug, Clone, Copy, Default, ValueEnum)]
pub enum Format {
    #[default]
    Tsv,
    Json,
}

/// How candidate pairs are scored.
#[derive(Debug, Args)]
pub struct ScorerArgs {
    /// Trained pair scorer checkpoint.
    #[arg(long, conflicts_with_all = ["oracle", "noisy_oracle"])]
    pub scorer: Option<PathBuf>,
    /// Score pairs from the gold chains.
    #[arg(long)]
    pub oracle: bool,
    /// Gold-derived scores with this fraction of pairs flipped.
    #[arg(long, value_name = "ERROR_RATE")]
    pub noisy_oracle: Option<f64>,
    /// Distance of noisy-oracle scores from 0.5.
    #[arg(long, default_value_t = 0.1)]
    pub margin: f64,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Check documents against the annotation invariants.
    Validate {
        #[arg(required = true)]
        inputs: Vec<PathBuf>,
    },
    /// Train one nesting level of the mention detector.
    TrainDetector {
        #[arg(required = true)]
        inputs: Vec<PathBuf>,
        #[arg(long, default_value_t = 0)]
        level: usize,
        #[arg(long)]
        out: PathBuf,
        /// Per-epoch JSONL log.
        #[arg(long)]
        log: Option<PathBuf>,
    },
    /// Predict mentions with trained taggers.
    Detect {
        #[arg(required = true)]
        inputs: Vec<PathBuf>,
        #[arg(long)]
        level0: PathBuf,
        #[arg(long)]
        level1: Option<PathBuf>,
        #[arg(long)]
        out_dir: PathBuf,
    },
    /// Train the mention-pair scorer on gold mentions.
    TrainPairs {
        #[arg(required = true)]
        inputs: Vec<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        log: Option<PathBuf>,
    },
    /// Build coreference chains.
    Resolve {
        #[arg(required = true)]
        inputs: Vec<PathBuf>,
        #[arg(long, value_enum, default_value = "left-to-right")]
        strategy: StrategyArg,
        /// Use the annotated mentions instead of running the detector.
        #[arg(long)]
        gold_mentions: bool,
        #[arg(long, required_unless_present = "gold_mentions")]
        detector: Option<PathBuf>,
        #[arg(long)]
        detector_level1: Option<PathBuf>,
        #[command(flatten)]
        scorer: ScorerArgs,
        #[arg(long)]
        out_dir: PathBuf,
        /// Also print the antecedent error taxonomy (gold mentions only).
        #[arg(long)]
        taxonomy: bool,
    },
    /// Compare predicted chains with gold chains.
    Score {
        #[arg(long, num_args = 1.., required = true)]
        gold: Vec<PathBuf>,
        #[arg(long, num_args = 1.., required = true)]
        pred: Vec<PathBuf>,
        #[arg(long, value_enum, default_value = "tsv")]
        format: Format,
    },
    /// Corpus statistics.
    Stats {
        #[arg(required = true)]
        inputs: Vec<PathBuf>,
        #[arg(long, value_enum, default_value = "tsv")]
        format: Format,
    },
    /// Nearest-antecedent distance percentiles per mention category.
    AntecedentDist {
        #[arg(required = true)]
        inputs: Vec<PathBuf>,
        #[arg(long, value_enum, default_value = "tsv")]
        format: Format,
    },
    /// Scores over fixed-length samples for several sample lengths.
    LengthSweep {
        #[arg(required = true)]
        inputs: Vec<PathBuf>,
        #[arg(long, value_delimiter = ',', num_args = 1.., required = true)]
        lengths: Vec<usize>,
        #[arg(long, value_enum, default_value = "left-to-right")]
        strategy: StrategyArg,
        #[command(flatten)]
        scorer: ScorerArgs,
        #[arg(long)]
        out_dir: PathBuf,
    },
    /// Three-stage mention gender inference and its evaluation.
    Gender {
        #[arg(required = true)]
        inputs: Vec<PathBuf>,
        /// Directory of predicted documents; gold chains are used otherwise.
        #[arg(long)]
        pred_dir: Option<PathBuf>,
        #[arg(long)]
        firstnames: Option<PathBuf>,
        /// Gender clue lexicon; the built-in French list otherwise.
        #[arg(long)]
        clues: Option<PathBuf>,
        #[arg(long)]
        threshold: Option<f64>,
        #[arg(long)]
        out_dir: PathBuf,
    },
    /// Generate a synthetic corpus.
    Synth {
        #[arg(long, value_enum, default_value = "custom")]
        family: Family,
        #[arg(long)]
        out_dir: PathBuf,
    },
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum Family {
    /// The `[synth]` section of the configuration.
    Custom,
    WindowSplit,
    Short,
    Gender,
    /// Capitalised-token corpus for the detector (`[capitalized]`).
    Capitalized,
}

#[derive(Debug)]
pub enum Failure {
    Usage(String),
    Input(String),
    Runtime(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Usage(_) => 1,
            Failure::Input(_) => 2,
            Failure::Runtime(_) => 3,
        }
    }
}

impl From<litcoref::Error> for Failure {
    fn from(e: litcoref::Error) -> Self {
        use litcoref::Error as E;
        match e {
            E::MalformedAnnotation(_)
            | E::Validation(_)
            | E::Parse { .. }
            | E::Embedding(_)
            | E::Attach(_)
            | E::Lexicon { .. }
            | E::MissingEmbeddings(_)
            | E::Config(_) => Failure::Input(e.to_string()),
            _ => Failure::Runtime(e.to_string()),
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let usage = e.use_stderr();
            let _ = e.print();
            return if usage { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match commands::run(cli) {
        Ok(code) => code,
        Err(f) => {
            let msg = match &f {
                Failure::Usage(m) | Failure::Input(m) | Failure::Runtime(m) => m,
            };
            eprintln!("litcoref: {msg}");
            ExitCode::from(f.code())
        }
    }
}
