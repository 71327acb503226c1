//! `rul`: command-line front end for the CMAPSS FD001 RUL engine.

mod benchmark;
mod commands;
mod manifest;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

/// Exit status for a failed verification (gradient check).
pub const EXIT_VERIFY: u8 = 1;
pub const EXIT_USAGE: u8 = 2;
pub const EXIT_DATA: u8 = 3;

#[derive(Parser, Debug)]
#[command(name = "rul", version, about = "Remaining-useful-life prediction on CMAPSS FD001")]
pub struct Cli {
    /// Directory holding train_FD001.txt, test_FD001.txt and RUL_FD001.txt.
    #[arg(long, global = true, env = "RUL_DATA_DIR", default_value = "data/CMAPSS")]
    pub data_dir: PathBuf,

    /// Where to write the run manifest (each command has a default).
    #[arg(long, global = true)]
    pub manifest: Option<PathBuf>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Print dataset summary statistics.
    Describe(DescribeArgs),
    /// Fit the preprocessing pipeline and write its artifacts.
    Preprocess(PreprocessArgs),
    /// Train one model.
    Train(TrainArgs),
    /// Score a saved model on the test set.
    Evaluate(EvaluateArgs),
    /// Train and evaluate all five models over several seeds.
    Benchmark(BenchmarkArgs),
    /// Compare analytic and finite-difference gradients on small networks.
    Gradcheck(GradcheckArgs),
}

#[derive(Args, Debug)]
pub struct DescribeArgs {
    /// Training file [default: <data-dir>/train_FD001.txt]
    #[arg(long)]
    pub train: Option<PathBuf>,
    /// Print a JSON document instead of text.
    #[arg(long)]
    pub json: bool,
    /// Write feature_means.csv and unit_cycles.csv here.
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct PreprocessArgs {
    #[arg(long)]
    pub train: Option<PathBuf>,
    /// canonical, eq1 or both.
    #[arg(long, default_value = "both")]
    pub mask: String,
    #[arg(long)]
    pub out_dir: PathBuf,
    /// Also export training windows of this length (windows.bin + windows.json).
    #[arg(long)]
    pub export_windows: Option<usize>,
}

#[derive(Args, Debug, Clone)]
pub struct TrainArgs {
    /// lr, lstm128, blstm128, blstm_dropout or blstm_dropout_bn.
    #[arg(long)]
    pub spec: String,
    #[arg(long)]
    pub train: Option<PathBuf>,
    /// Model manifest path; the payload is written next to it as .bin.
    #[arg(long, default_value = "model.json")]
    pub out: PathBuf,
    /// Window length [default: 30, or 1 for lr]
    #[arg(long)]
    pub window: Option<usize>,
    #[arg(long)]
    pub batch_size: Option<usize>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub lr: Option<f64>,
    #[arg(long)]
    pub plateau_factor: Option<f64>,
    #[arg(long)]
    pub plateau_patience: Option<usize>,
    #[arg(long)]
    pub early_stop_patience: Option<usize>,
    #[arg(long)]
    pub val_fraction: Option<f64>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value = "both")]
    pub mask: String,
    /// Suppress per-epoch progress on stderr.
    #[arg(long)]
    pub quiet: bool,
}

#[derive(Args, Debug)]
pub struct EvaluateArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub test: Option<PathBuf>,
    #[arg(long)]
    pub rul: Option<PathBuf>,
    /// Prediction CSV [default: <model stem>_predictions.csv]
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub json: bool,
}

#[derive(Args, Debug)]
pub struct BenchmarkArgs {
    #[arg(long)]
    pub train: Option<PathBuf>,
    #[arg(long)]
    pub test: Option<PathBuf>,
    #[arg(long)]
    pub rul: Option<PathBuf>,
    #[arg(long, value_delimiter = ',', default_value = "1,2,3")]
    pub seeds: Vec<u64>,
    #[arg(long, default_value = "benchmark")]
    pub out_dir: PathBuf,
    /// Concurrent sub-runs.
    #[arg(long, default_value_t = 1)]
    pub jobs: usize,
    /// Epoch cap for the neural models.
    #[arg(long)]
    pub epochs: Option<usize>,
    /// Separate epoch cap for blstm_dropout_bn.
    #[arg(long)]
    pub bn_epochs: Option<usize>,
    #[arg(long)]
    pub batch_size: Option<usize>,
    #[arg(long)]
    pub window: Option<usize>,
    /// Subset of model ids to run (default: all five).
    #[arg(long, value_delimiter = ',')]
    pub specs: Option<Vec<String>>,
}

#[derive(Args, Debug)]
pub struct GradcheckArgs {
    /// Perturb one analytic gradient before comparing.
    #[arg(long, hide = true)]
    pub corrupt_backward: bool,
}

fn exit_code(err: &anyhow::Error) -> u8 {
    if let Some(e) = err.chain().find_map(|c| c.downcast_ref::<rul_core::Error>()) {
        if e.is_usage_error() {
            return EXIT_USAGE;
        }
        if e.is_data_error() {
            return EXIT_DATA;
        }
    }
    if err.chain().any(|c| c.downcast_ref::<commands::UsageError>().is_some()) {
        return EXIT_USAGE;
    }
    1
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match commands::run(&cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
