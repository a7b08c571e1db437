mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Parser, Debug)]
#[command(name = "narrclause", version, about = "Narrative clause segmentation, classification and story matching")]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Args, Debug, Clone)]
pub struct GlobalArgs {
    /// Seed for aggregation tie-breaks, splitting, training and sampling.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// JSON run configuration; flags override its values.
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,
    /// Worker threads (defaults to all cores).
    #[arg(long, global = true)]
    pub jobs: Option<usize>,
}

#[derive(Args, Debug, Clone, Default)]
pub struct EncoderArgs {
    /// Word-vector text file; clauses are encoded as mean word vectors.
    #[arg(long, value_name = "FILE")]
    pub embeddings: Option<PathBuf>,
    /// Width of the word vectors in --embeddings.
    #[arg(long, default_value_t = 300)]
    pub dim: usize,
    /// JSON lines of precomputed clause vectors {"text", "vector"}.
    #[arg(long, value_name = "FILE")]
    pub vectors: Option<PathBuf>,
    /// Trained classifier; labels clauses without gold and, if no other
    /// encoder is given, supplies its embedding table as word vectors.
    #[arg(long, value_name = "DIR")]
    pub checkpoint: Option<PathBuf>,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
pub enum Partition {
    Train,
    Validation,
    Test,
    All,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
pub enum Baseline {
    Svm,
    Rf,
    Majority,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
pub enum ReportKind {
    Detection,
    Mentions,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Segment parse trees into clauses and write an unannotated corpus.
    Split {
        #[arg(long, value_name = "FILE")]
        trees: PathBuf,
        #[arg(long, value_name = "FILE")]
        out: PathBuf,
    },
    /// Derive gold labels by majority vote and summarize the label distribution.
    Aggregate {
        #[arg(long, value_name = "FILE")]
        corpus: PathBuf,
        #[arg(long, value_name = "FILE")]
        out: Option<PathBuf>,
    },
    /// Corpus counts, frequent bigrams and per-story word frequencies.
    Stats {
        #[arg(long, value_name = "FILE")]
        corpus: PathBuf,
        #[arg(long, default_value_t = 10)]
        top_k: usize,
        /// Word whose mean count per story is reported; repeatable.
        #[arg(long = "word")]
        words: Vec<String>,
        #[arg(long, value_name = "FILE")]
        out: Option<PathBuf>,
    },
    /// Train the convolutional classifier and write a checkpoint directory.
    Train {
        #[arg(long, value_name = "FILE")]
        corpus: PathBuf,
        #[arg(long, value_name = "DIR")]
        out: PathBuf,
        /// Pretrained word vectors; random init when omitted.
        #[arg(long, value_name = "FILE")]
        embeddings: Option<PathBuf>,
        #[arg(long)]
        epochs: Option<usize>,
        #[arg(long)]
        learning_rate: Option<f64>,
        #[arg(long)]
        batch_size: Option<usize>,
        /// Epochs without improvement before stopping; 0 disables early stopping.
        #[arg(long)]
        patience: Option<usize>,
        /// Minimum annotator agreement for clauses used in training and evaluation.
        #[arg(long)]
        min_agreement: Option<u8>,
        /// Suppress per-epoch progress lines.
        #[arg(long)]
        quiet: bool,
    },
    /// Score a trained classifier or a baseline on one partition.
    Evaluate {
        #[arg(long, value_name = "FILE")]
        corpus: PathBuf,
        #[arg(long, value_name = "DIR", conflicts_with = "baseline", required_unless_present = "baseline")]
        checkpoint: Option<PathBuf>,
        #[arg(long, value_enum)]
        baseline: Option<Baseline>,
        /// `all`, `2` (at least two), `3`, `>=N` or `=N`.
        #[arg(long, default_value = "all")]
        agreement: String,
        #[arg(long, value_enum, default_value_t = Partition::Test)]
        partition: Partition,
        /// 45-line tagset file for the feature baselines.
        #[arg(long, value_name = "FILE")]
        tagset: Option<PathBuf>,
        #[arg(long, value_name = "FILE")]
        out: Option<PathBuf>,
    },
    /// Label every clause of a corpus with a trained classifier.
    Predict {
        #[arg(long, value_name = "FILE")]
        corpus: PathBuf,
        #[arg(long, value_name = "DIR")]
        checkpoint: PathBuf,
        #[arg(long, value_name = "FILE")]
        out: PathBuf,
    },
    /// Similarity of two stories at one aspect.
    Match {
        #[arg(long, value_name = "FILE")]
        corpus: PathBuf,
        #[arg(long = "a", value_name = "STORY")]
        story_a: String,
        #[arg(long = "b", value_name = "STORY")]
        story_b: String,
        /// `action`, `evaluation`, `orientation` or `all`.
        #[arg(long)]
        aspect: Option<String>,
        #[command(flatten)]
        encoder: EncoderArgs,
        #[arg(long, value_name = "FILE")]
        out: Option<PathBuf>,
    },
    /// Story pairs matched at exactly one aspect, optionally with distractors.
    SelectPairs {
        #[arg(long, value_name = "FILE")]
        corpus: PathBuf,
        #[arg(long)]
        aspect: Option<String>,
        #[arg(long)]
        threshold: Option<f64>,
        /// Maximum number of pairs to sample.
        #[arg(long)]
        n: Option<usize>,
        /// Also pick, for each pair, a distractor story for the first story.
        #[arg(long)]
        distractors: bool,
        #[command(flatten)]
        encoder: EncoderArgs,
        #[arg(long, value_name = "FILE")]
        out: PathBuf,
    },
    /// Summarize forced-choice judgments.
    Report {
        #[arg(long, value_name = "FILE")]
        records: PathBuf,
        #[arg(long, value_enum, default_value_t = ReportKind::Detection)]
        kind: ReportKind,
        /// Directory for the CSV and run config.
        #[arg(long, value_name = "DIR")]
        out_dir: Option<PathBuf>,
    },
}

const EXIT_USAGE: u8 = 1;
const EXIT_DATA: u8 = 2;
const EXIT_INTERNAL: u8 = 3;

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match std::panic::catch_unwind(|| commands::run(cli)) {
        Ok(Ok(())) => ExitCode::SUCCESS,
        Ok(Err(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(commands::exit_code(&e))
        }
        Err(_) => ExitCode::from(EXIT_INTERNAL),
    }
}
