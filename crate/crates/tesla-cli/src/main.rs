//! Command-line frontend: synthesize data, train and evaluate
//! calibration models, stream calibrated readings, inspect bin
//! schedules, and profile analytical costs.
//!
//! Every failure exits with a class-specific code — 2 for usage and
//! configuration problems, 3 for data problems, 4 for numeric ones — and
//! prints a single `error_code: message` line to stderr.

mod commands;
mod config;

use clap::{Parser, Subcommand};

use config::CommonArgs;

#[derive(Parser)]
#[command(name = "tesla", version, about = "Low-cost sensor calibration toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Synthesize a co-located sensor CSV.
    Generate {
        #[command(flatten)]
        common: CommonArgs,
        /// Number of co-located sensors (at least 3).
        #[arg(long)]
        sensors: Option<usize>,
        /// Readings per sensor, one per minute.
        #[arg(long)]
        len: Option<usize>,
        /// Destination CSV path.
        #[arg(long)]
        out: std::path::PathBuf,
    },
    /// Train a calibration model and write a checkpoint.
    Train {
        #[command(flatten)]
        common: CommonArgs,
        /// Input CSV of paired low-cost and reference readings.
        #[arg(long)]
        data: std::path::PathBuf,
        /// Destination checkpoint path.
        #[arg(long)]
        out: std::path::PathBuf,
        /// Optional destination for the per-epoch trace CSV.
        #[arg(long)]
        trace_out: Option<std::path::PathBuf>,
    },
    /// Score a checkpoint on the held-out test sensor.
    Evaluate {
        /// Checkpoint written by `train`.
        #[arg(long)]
        checkpoint: std::path::PathBuf,
        /// Input CSV of paired low-cost and reference readings.
        #[arg(long)]
        data: std::path::PathBuf,
        /// Destination report path; stdout when omitted.
        #[arg(long)]
        out: Option<std::path::PathBuf>,
    },
    /// Stream a raw CSV through a checkpoint, row by row.
    Calibrate {
        /// Checkpoint written by `train`.
        #[arg(long)]
        checkpoint: std::path::PathBuf,
        /// Input CSV of low-cost readings.
        #[arg(long)]
        data: std::path::PathBuf,
        /// Destination CSV with calibrated readings.
        #[arg(long)]
        out: std::path::PathBuf,
    },
    /// Print the bin partition for a window length.
    Bins {
        /// Window length.
        #[arg(long)]
        n: usize,
        /// Bin schedule: log or uniform.
        #[arg(long, default_value = "log")]
        binning: String,
        /// Emit JSON instead of a table.
        #[arg(long)]
        json: bool,
    },
    /// Report analytical parameter, FLOP, and memory costs.
    Profile {
        #[command(flatten)]
        common: CommonArgs,
        /// Output format: json or csv.
        #[arg(long, default_value = "json")]
        format: String,
        /// Destination path; stdout when omitted.
        #[arg(long)]
        out: Option<std::path::PathBuf>,
    },
}

fn run(cli: Cli) -> tesla::Result<()> {
    match cli.command {
        Command::Generate { common, sensors, len, out } => {
            commands::generate(&common, sensors, len, &out)
        }
        Command::Train { common, data, out, trace_out } => {
            commands::train(&common, &data, &out, trace_out.as_deref())
        }
        Command::Evaluate { checkpoint, data, out } => {
            commands::evaluate(&checkpoint, &data, out.as_deref())
        }
        Command::Calibrate { checkpoint, data, out } => {
            commands::calibrate(&checkpoint, &data, &out)
        }
        Command::Bins { n, binning, json } => commands::bins(n, &binning, json),
        Command::Profile { common, format, out } => {
            commands::profile(&common, &format, out.as_deref())
        }
    }
}

fn main() {
    let cli = Cli::parse();
    if let Err(err) = run(cli) {
        eprintln!("{}: {err}", err.code());
        std::process::exit(err.exit_code());
    }
}
