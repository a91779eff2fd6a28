use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use mfac_core::analytic::SolutionKind;
use mfac_core::trainer::Profile;

mod commands;
mod report;

pub use commands::CliError;

/// Environment variable that redirects run outputs when `--out` is absent.
pub const OUTPUT_DIR_ENV: &str = "MFAC_OUTPUT_DIR";

#[derive(Parser, Debug)]
#[command(name = "mfac", version, about = "Mean field actor-critic solver")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Train on a run configuration (one seed or a seed ensemble)
    Train(TrainArgs),
    /// Print the closed-form solution of a configuration as JSON
    Analytic(AnalyticArgs),
    /// Resample a checkpointed score and write a histogram
    ExportHist(ExportHistArgs),
}

#[derive(Args, Debug)]
pub struct TrainArgs {
    /// Run configuration file; optional when resuming
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Seed (first seed of an ensemble); defaults to the config's seed
    #[arg(long)]
    pub seed: Option<u64>,
    /// Number of consecutive seeds to run
    #[arg(long, default_value_t = 1, value_parser = clap::value_parser!(u64).range(1..))]
    pub seeds: u64,
    #[arg(long)]
    pub profile: Option<Profile>,
    /// Output directory
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Continue from a checkpoint
    #[arg(long)]
    pub resume: Option<PathBuf>,
    /// Stop after this many total steps and checkpoint
    #[arg(long)]
    pub stop_after: Option<u64>,
    /// Suppress progress lines on stderr
    #[arg(long)]
    pub quiet: bool,
}

#[derive(Args, Debug)]
pub struct AnalyticArgs {
    #[arg(long)]
    pub config: PathBuf,
    /// Defaults to the configured training mode
    #[arg(long)]
    pub kind: Option<SolutionKind>,
}

#[derive(Args, Debug)]
pub struct ExportHistArgs {
    #[arg(long)]
    pub checkpoint: PathBuf,
    #[arg(long, default_value_t = 100)]
    pub bins: usize,
    #[arg(long, num_args = 2, value_names = ["LO", "HI"], allow_negative_numbers = true)]
    pub range: Vec<f64>,
    /// Output file (default: histogram.json next to the checkpoint)
    #[arg(long)]
    pub out: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Train(a) => commands::train(&a),
        Command::Analytic(a) => commands::analytic(&a),
        Command::ExportHist(a) => commands::export_hist(&a),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
