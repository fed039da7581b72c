use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

/// Imbalanced classification with a set convolution layer.
///
/// Every flag can also be set through an environment variable named
/// `SETCONV_` followed by the flag name in upper case with dashes replaced
/// by underscores, e.g. `SETCONV_SUPPORT_SIZE=32`. Flags win over the
/// environment.
#[derive(Debug, Parser)]
#[command(name = "setconv", version, args_override_self = true)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a labelled Gaussian dataset with exact class counts.
    Synth(SynthArgs),
    /// Split a labelled dataset, train on 70 % of it and write a model.
    Train(TrainArgs),
    /// Compute per-class metrics of a model on a labelled dataset.
    Eval(EvalArgs),
    /// Predict labels and per-class scores for a feature file.
    Predict(PredictArgs),
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    /// Number of classes; must match the length of --counts when given.
    #[arg(long, env = "SETCONV_CLASSES")]
    pub classes: Option<usize>,
    /// Comma-separated row count per class, e.g. 900,100.
    #[arg(long, env = "SETCONV_COUNTS", value_delimiter = ',', required = true)]
    pub counts: Vec<usize>,
    /// Feature dimension (at least the number of classes).
    #[arg(long, env = "SETCONV_DIM")]
    pub dim: usize,
    /// Distance between any two class means, in units of --std.
    #[arg(long, env = "SETCONV_SEP")]
    pub sep: f64,
    /// Per-feature standard deviation within a class.
    #[arg(long, env = "SETCONV_STD", default_value_t = 1.0)]
    pub std: f64,
    #[arg(long, env = "SETCONV_SEED", default_value_t = 0)]
    pub seed: u64,
    #[arg(long, env = "SETCONV_LABEL_COL", default_value = "label")]
    pub label_col: String,
    /// Output CSV path.
    #[arg(long, env = "SETCONV_OUT")]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ModeArg {
    /// One SetConv layer for a two-class dataset.
    Binary,
    /// One-vs-all: one binary head per class.
    Multiclass,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// Labelled CSV with a header row.
    #[arg(long, env = "SETCONV_DATA")]
    pub data: PathBuf,
    #[arg(long, env = "SETCONV_LABEL_COL", default_value = "label")]
    pub label_col: String,
    #[arg(long, env = "SETCONV_MODE", value_enum, default_value_t = ModeArg::Binary)]
    pub mode: ModeArg,
    /// Support set size per episode (majority + minority rows).
    #[arg(long, env = "SETCONV_SUPPORT_SIZE", default_value_t = 64)]
    pub support_size: usize,
    /// Output dimension of the SetConv layer.
    #[arg(long, env = "SETCONV_D_OUT", default_value_t = 128)]
    pub d_out: usize,
    /// Hidden width of the kernel network.
    #[arg(long, env = "SETCONV_HIDDEN", default_value_t = 128)]
    pub hidden: usize,
    #[arg(long, env = "SETCONV_ITERATIONS", default_value_t = 2000)]
    pub iterations: usize,
    /// Adam learning rate.
    #[arg(long, env = "SETCONV_LR", default_value_t = 0.01)]
    pub lr: f64,
    #[arg(long, env = "SETCONV_SEED", default_value_t = 0)]
    pub seed: u64,
    /// Rows sampled from the training split to build class representatives.
    #[arg(long, env = "SETCONV_S_POST", default_value_t = 1000)]
    pub s_post: usize,
    #[arg(long, env = "SETCONV_MODEL_OUT")]
    pub model_out: PathBuf,
    /// Optional CSV of the per-iteration training loss.
    #[arg(long, env = "SETCONV_LOSS_LOG")]
    pub loss_log: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SplitArg {
    /// Rows held out at training time (requires the training dataset).
    Test,
    /// Rows used for training (requires the training dataset).
    Train,
    /// Every row of the given file.
    All,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long, env = "SETCONV_DATA")]
    pub data: PathBuf,
    #[arg(long, env = "SETCONV_LABEL_COL", default_value = "label")]
    pub label_col: String,
    #[arg(long, env = "SETCONV_MODEL")]
    pub model: PathBuf,
    #[arg(long, env = "SETCONV_SPLIT", value_enum, default_value_t = SplitArg::Test)]
    pub split: SplitArg,
    /// Optional CSV copy of the report.
    #[arg(long, env = "SETCONV_REPORT_OUT")]
    pub report_out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct PredictArgs {
    /// Feature CSV with a header row.
    #[arg(long, env = "SETCONV_DATA")]
    pub data: PathBuf,
    /// Label column to ignore if the file has one.
    #[arg(long, env = "SETCONV_LABEL_COL")]
    pub label_col: Option<String>,
    #[arg(long, env = "SETCONV_MODEL")]
    pub model: PathBuf,
    /// Output CSV; printed to stdout when omitted.
    #[arg(long, env = "SETCONV_OUT")]
    pub out: Option<PathBuf>,
}
