//! Argument parsing and the subcommands behind the `tweetclf` binary.
//!
//! Every option can also be given through an environment variable named
//! `TWEETCLF_<OPTION>` (for example `TWEETCLF_EPOCHS`). Training
//! hyperparameters are resolved as flag, then environment, then
//! `--config` file, then built-in default.

use std::ffi::OsString;
use std::io::Write;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use tweetclf::model::ModelKind;
use tweetclf::Error;

pub mod commands;

/// Exit status for success.
pub const EXIT_OK: i32 = 0;
/// Bad flags, config or arguments.
pub const EXIT_USAGE: i32 = 2;
/// Unreadable, malformed or inconsistent data.
pub const EXIT_DATA: i32 = 3;
/// Training diverged.
pub const EXIT_NUMERIC: i32 = 4;

#[derive(Debug, Parser)]
#[command(
    name = "tweetclf",
    version,
    about = "Cyberbullying tweet classifiers: word BiLSTM, char CNN and their combination"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Clean, deduplicate, encode and split a raw CSV into a prepared dataset.
    Prepare(PrepareArgs),
    /// Train a model on a prepared dataset.
    Train(TrainArgs),
    /// Score a checkpoint on a prepared split.
    Evaluate(EvaluateArgs),
    /// Classify free text.
    Predict(PredictArgs),
    /// PCA of the learned word embeddings.
    Project(ProjectArgs),
    /// Per-layer parameter counts of an architecture.
    Params(ParamsArgs),
}

#[derive(Debug, Args)]
pub struct PrepareArgs {
    /// Raw CSV with a text column and a class column.
    #[arg(long, env = "TWEETCLF_DATA")]
    pub data: PathBuf,
    #[arg(long, env = "TWEETCLF_OUT")]
    pub out: PathBuf,
    #[arg(long, env = "TWEETCLF_SEED", default_value_t = 42)]
    pub seed: u64,
    /// `source = class` label map; defaults to the shipped five-class map.
    #[arg(long, env = "TWEETCLF_LABELS")]
    pub labels: Option<PathBuf>,
    /// Stop-word list, one per line; defaults to the shipped English list.
    #[arg(long, env = "TWEETCLF_STOPWORDS")]
    pub stopwords: Option<PathBuf>,
    #[arg(long, env = "TWEETCLF_MIN_FREQ", default_value_t = 1)]
    pub min_freq: usize,
    #[arg(long, env = "TWEETCLF_WORD_LENGTH", default_value_t = tweetclf::model::spec::DEFAULT_WORD_LENGTH)]
    pub word_length: usize,
    /// Share of every class that goes to the training split.
    #[arg(long, env = "TWEETCLF_TRAIN_FRACTION", default_value_t = 0.8)]
    pub train_fraction: f64,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// Prepared dataset directory.
    #[arg(long, env = "TWEETCLF_DATA")]
    pub data: PathBuf,
    #[arg(long, env = "TWEETCLF_OUT")]
    pub out: PathBuf,
    #[arg(long, env = "TWEETCLF_MODEL")]
    pub model: Option<ModelKind>,
    /// GloVe text file used to initialise the word embedding.
    #[arg(long, env = "TWEETCLF_GLOVE")]
    pub glove: Option<PathBuf>,
    /// `key = value` training config.
    #[arg(long, env = "TWEETCLF_CONFIG")]
    pub config: Option<PathBuf>,
    #[arg(long, env = "TWEETCLF_SEED")]
    pub seed: Option<u64>,
    #[arg(long, env = "TWEETCLF_EPOCHS")]
    pub epochs: Option<usize>,
    #[arg(long, env = "TWEETCLF_BATCH")]
    pub batch: Option<usize>,
    #[arg(long, env = "TWEETCLF_LR")]
    pub lr: Option<f64>,
    /// Combined model only: train the word and char models first and
    /// start from their weights.
    #[arg(long, env = "TWEETCLF_PRETRAIN")]
    pub pretrain: bool,
    /// Combined model only: start the word branch from this word checkpoint.
    #[arg(long, requires = "from_char")]
    pub from_word: Option<PathBuf>,
    /// Combined model only: start the char branch from this char checkpoint.
    #[arg(long, requires = "from_word")]
    pub from_char: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct CheckpointArgs {
    /// Prepared dataset directory (vocabulary, classes and splits).
    #[arg(long, env = "TWEETCLF_DATA")]
    pub data: PathBuf,
    /// Checkpoint file; defaults to `model.ckpt` in the output directory.
    #[arg(long, env = "TWEETCLF_CHECKPOINT")]
    pub checkpoint: Option<PathBuf>,
    /// Refuse checkpoints of any other architecture.
    #[arg(long, env = "TWEETCLF_MODEL")]
    pub model: Option<ModelKind>,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    #[command(flatten)]
    pub ckpt: CheckpointArgs,
    #[arg(long, env = "TWEETCLF_OUT")]
    pub out: PathBuf,
    /// `test` or `train`.
    #[arg(long, default_value = "test")]
    pub split: String,
    /// Decimals in the rendered percentage table.
    #[arg(long, default_value_t = 1)]
    pub decimals: usize,
}

#[derive(Debug, Args)]
pub struct PredictArgs {
    #[command(flatten)]
    pub ckpt: CheckpointArgs,
    #[arg(long, env = "TWEETCLF_OUT")]
    pub out: Option<PathBuf>,
    /// Texts to classify.
    #[arg(required = true)]
    pub text: Vec<String>,
}

#[derive(Debug, Args)]
pub struct ProjectArgs {
    #[command(flatten)]
    pub ckpt: CheckpointArgs,
    #[arg(long, env = "TWEETCLF_OUT")]
    pub out: PathBuf,
    /// Number of most frequent tokens to project.
    #[arg(long, default_value_t = tweetclf::projection::DEFAULT_TOP_TOKENS)]
    pub top: usize,
    /// Output dimensions, 1 to 3.
    #[arg(long, default_value_t = 2, value_parser = clap::value_parser!(u8).range(1..=3))]
    pub dims: u8,
}

#[derive(Debug, Args)]
pub struct ParamsArgs {
    #[arg(value_name = "MODEL")]
    pub kind: ModelKind,
    /// Vocabulary size (embedding rows).
    #[arg(long, env = "TWEETCLF_VOCAB", default_value_t = tweetclf::model::spec::REFERENCE_VOCAB)]
    pub vocab: usize,
    /// Emit JSON instead of a table.
    #[arg(long)]
    pub json: bool,
}

/// Process exit status for a library error.
pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::Numeric(_) => EXIT_NUMERIC,
        Error::Config(_)
        | Error::InvalidArgument(_)
        | Error::MissingColumn(_)
        | Error::SpecMismatch { .. } => EXIT_USAGE,
        _ => EXIT_DATA,
    }
}

/// Parses `args` and runs the subcommand, writing results to `out` and
/// diagnostics to stderr. Returns the exit status.
pub fn run<I, T>(args: I, out: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    match commands::dispatch(cli.command, out) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}
