use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use tabdiff_cli::commands;

/// Federated diffusion-based synthesis of mixed-type tabular data.
#[derive(Parser)]
#[command(name = "tabdiff", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Validate the data pipeline and write the client partition manifest.
    Prepare {
        /// Run configuration (TOML).
        #[arg(long)]
        config: PathBuf,
        /// Dotted override, e.g. --set federation.seed=7 (repeatable).
        #[arg(long = "set", value_name = "KEY=VALUE")]
        overrides: Vec<String>,
    },
    /// Train the federated model, or a standalone per-client baseline.
    Train {
        #[arg(long)]
        config: PathBuf,
        #[arg(long = "set", value_name = "KEY=VALUE")]
        overrides: Vec<String>,
        /// Resume a federated run from this checkpoint.
        #[arg(long)]
        resume: Option<PathBuf>,
        /// Train a standalone baseline on this client's data only.
        #[arg(long, value_name = "CLIENT")]
        local: Option<usize>,
    },
    /// Draw synthetic rows from a checkpoint.
    Sample {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        rows: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Output CSV path.
        #[arg(long)]
        output: PathBuf,
    },
    /// Score a synthetic table against real data.
    Evaluate {
        #[arg(long)]
        schema: PathBuf,
        #[arg(long)]
        real: PathBuf,
        #[arg(long)]
        synth: PathBuf,
        /// Classification target for the utility score; defaults to the
        /// schema's label column, then its split column.
        #[arg(long)]
        label_column: Option<String>,
        /// Skip the classifier-based utility score.
        #[arg(long)]
        no_utility: bool,
        /// Cap on real x synth distance pairs before subsampling.
        #[arg(long, default_value_t = tabdiff::metrics::DEFAULT_MAX_PAIRS)]
        max_pairs: usize,
        /// Write the JSON report here instead of stdout.
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Cross-client heatmaps: each model scored against each data subset.
    Report {
        #[arg(long)]
        schema: PathBuf,
        #[arg(long)]
        real: PathBuf,
        /// Model table as name=path.csv (repeatable).
        #[arg(long = "model", value_name = "NAME=PATH")]
        models: Vec<String>,
        #[arg(long)]
        split_column: Option<String>,
        /// Directory for fidelity.csv, coverage.csv and privacy.csv.
        #[arg(long)]
        output: PathBuf,
    },
    /// Generate the deterministic toy dataset and its schema.
    Toydata {
        #[arg(long, default_value_t = 5000)]
        rows: usize,
        #[arg(long, default_value_t = 7)]
        seed: u64,
        /// Directory for toy.csv and schema.toml.
        #[arg(long)]
        output: PathBuf,
    },
}

fn run(cli: Cli) -> anyhow::Result<()> {
    match cli.command {
        Command::Prepare { config, overrides } => commands::prepare(&config, &overrides),
        Command::Train { config, overrides, resume, local } => {
            commands::train(&config, &overrides, resume.as_deref(), local)
        }
        Command::Sample { checkpoint, rows, seed, output } => {
            commands::sample(&checkpoint, rows, seed, &output)
        }
        Command::Evaluate {
            schema,
            real,
            synth,
            label_column,
            no_utility,
            max_pairs,
            output,
        } => commands::evaluate_cmd(
            &schema,
            &real,
            &synth,
            label_column.as_deref(),
            no_utility,
            max_pairs,
            output.as_deref(),
        ),
        Command::Report { schema, real, models, split_column, output } => {
            commands::report(&schema, &real, &models, split_column.as_deref(), &output)
        }
        Command::Toydata { rows, seed, output } => commands::toydata_cmd(rows, seed, &output),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
