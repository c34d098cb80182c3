mod commands;
mod config;
mod exit;

use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use crate::exit::Failure;

#[derive(Parser)]
#[command(name = "squatwatch", version, about = "Find newly observed domains that impersonate known brands")]
struct Cli {
    /// Pipeline configuration file.
    #[arg(short, long, global = true, default_value = "squatwatch.toml")]
    config: PathBuf,
    /// Overrides the configured seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// More log output on stderr (-v info, -vv debug).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Parse feeds, keep names in active use and write the newly observed ones
    Ingest {
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Build or refresh the reference embedding index
    Index {
        /// Discard an existing index built with another embedder.
        #[arg(long)]
        rebuild: bool,
    },
    /// Run the model-backed detection pipeline over a name list
    Detect {
        #[arg(long)]
        input: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        chunk_size: Option<usize>,
        #[arg(long)]
        max_attempts: Option<u32>,
    },
    /// Run the rule-based detectors over a name list
    Baseline {
        #[arg(long)]
        input: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Score a detector against a labelled dataset
    Eval {
        #[arg(long)]
        dataset: Option<PathBuf>,
        /// Score the rule-based detectors instead of the configured backend.
        #[arg(long)]
        baseline: bool,
        #[arg(long)]
        chunk_size: Option<usize>,
        #[arg(long)]
        max_attempts: Option<u32>,
    },
    /// Summarize a verdict file and estimate model cost
    Report {
        #[arg(long)]
        verdicts: Option<PathBuf>,
        #[arg(long)]
        input_tokens: Option<u64>,
        #[arg(long)]
        output_tokens: Option<u64>,
        /// Print the summary as JSON.
        #[arg(long)]
        json: bool,
    },
    /// Generate a labelled synthetic dataset
    Dataset {
        #[arg(long)]
        out: Option<PathBuf>,
        /// Write this many hybrid names, one per line, instead.
        #[arg(long)]
        hybrid: Option<usize>,
    },
}

fn init_logging(verbose: u8) {
    let level = match verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level))
        .format(|buf, record| {
            writeln!(buf, "{} {:<5} {} {}", buf.timestamp_millis(), record.level(), record.target(), record.args())
        })
        .init();
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    init_logging(cli.verbose);
    match commands::run(cli) {
        Ok(code) => code,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(err.downcast_ref::<Failure>().map_or(1, Failure::code))
        }
    }
}
