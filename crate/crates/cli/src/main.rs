//! `codeqa`: command-line front end.
//!
//! Exit status is 0 on success, 1 for configuration or usage errors and 2
//! for data errors.

mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use codeqa_core::corpus::CorpusKind;
use codeqa_core::training::Scheme;
use codeqa_core::{Error, Label, Split};

#[derive(Debug, Parser)]
#[command(name = "codeqa", version, about = "Java method quality assessment pipeline")]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct Common {
    /// Root seed for every random stream.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Flat `key = value` config file; flags override it.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory (or JSONL file for `extract` and `synth`).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Extra `key=value` config overrides.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    overrides: Vec<String>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Extract method samples from a directory of .java files.
    Extract {
        #[arg(long = "in")]
        input: PathBuf,
        /// Score sidecar JSONL ({"id", "score"}).
        #[arg(long)]
        labels: Option<PathBuf>,
        #[arg(long)]
        label_threshold: Option<f64>,
    },
    /// Generate a synthetic corpus.
    Synth {
        #[arg(long, default_value_t = 500)]
        n: usize,
        #[arg(long, default_value = "task")]
        kind: CorpusKind,
        #[arg(long)]
        bad_fraction: Option<f64>,
        /// Leave labelled task samples unsplit.
        #[arg(long)]
        no_split: bool,
    },
    /// Build a vocabulary from one or more datasets.
    Vocab {
        #[arg(long = "data", required = true)]
        data: Vec<PathBuf>,
        #[arg(long)]
        min_freq: Option<usize>,
        #[arg(long)]
        max_size: Option<usize>,
    },
    /// MLM pre-training for one scheme.
    Pretrain {
        #[arg(long)]
        scheme: Scheme,
        #[arg(long)]
        vocab: PathBuf,
        #[arg(long)]
        generic: Option<PathBuf>,
        #[arg(long)]
        domain: Option<PathBuf>,
        /// Unlabeled task corpus.
        #[arg(long)]
        task: Option<PathBuf>,
    },
    /// Fine-tune a pre-trained checkpoint on the train split.
    Finetune {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        data: PathBuf,
    },
    /// TF-IDF random-forest baseline.
    Baseline {
        #[command(subcommand)]
        action: BaselineAction,
    },
    /// Score a split with a fine-tuned checkpoint.
    Predict {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        data: PathBuf,
        #[arg(long, default_value = "test")]
        split: Split,
        #[arg(long, default_value = "encoder")]
        name: String,
    },
    /// Metrics, curves and table row for a predictions file.
    Evaluate {
        #[arg(long = "predictions", required = true)]
        predictions: Vec<PathBuf>,
        #[arg(long)]
        positive: Option<Label>,
    },
    /// Shapley attribution of one method's prediction.
    Explain {
        #[arg(long)]
        checkpoint: PathBuf,
        /// Dataset containing the sample named by --id.
        #[arg(long, requires = "id")]
        data: Option<PathBuf>,
        #[arg(long)]
        id: Option<String>,
        /// A .java file holding exactly one method.
        #[arg(long, conflicts_with = "data")]
        source: Option<PathBuf>,
        #[arg(long, default_value = "bad")]
        target: Label,
        #[arg(long)]
        permutations: Option<usize>,
        #[arg(long)]
        max_span: Option<usize>,
    },
    /// All schemes plus the baseline, with a comparison table.
    Reproduce {
        /// Size of the synthetic labelled corpus when no task data is configured.
        #[arg(long)]
        synthetic: Option<usize>,
        #[arg(long)]
        task_data: Option<PathBuf>,
        #[arg(long)]
        labels: Option<PathBuf>,
        #[arg(long)]
        label_threshold: Option<f64>,
        /// Comma-separated subset of base,dapt,tapt,task-only.
        #[arg(long)]
        schemes: Option<String>,
    },
}

#[derive(Debug, Subcommand)]
enum BaselineAction {
    /// Fit TF-IDF and the forest on the train split.
    Train {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        vocab: Option<PathBuf>,
        #[arg(long)]
        trees: Option<usize>,
    },
    /// Score a split with a stored forest.
    Predict {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        data: PathBuf,
        #[arg(long, default_value = "test")]
        split: Split,
    },
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match commands::run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}

fn exit_code(e: &Error) -> u8 {
    if e.is_config() {
        1
    } else {
        2
    }
}
