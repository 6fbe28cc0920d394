//! `uercm`: command-line front end for the EEG reading-comprehension
//! pipeline. Every subcommand reads its inputs immutably, writes into
//! `--out`, and records the resolved configuration in `run.lock` there,
//! so identical invocations produce identical output trees.

mod cmd;
mod features_io;
mod plot;
mod runlock;
mod workers;

use std::process::ExitCode;

use clap::{Parser, Subcommand};

use uercm_core::error::Error;

#[derive(Parser)]
#[command(name = "uercm", version, about = "EEG reading-comprehension pipeline")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate synthetic recording sessions for a participant cohort.
    Synth(cmd::synth::Args),
    /// Re-reference, filter, epoch, reject, and baseline-correct sessions.
    Preprocess(cmd::preprocess::Args),
    /// Grand averages, global field power, component statistics, plots.
    Erp(cmd::erp::Args),
    /// Extract the 69-dim word feature vectors into a CSV table.
    Features(cmd::features::Args),
    /// Train the attention model on extracted features.
    Train(cmd::train::Args),
    /// Cross-validated evaluation against the untrained reference.
    Evaluate(cmd::evaluate::Args),
    /// Combine evaluation runs into one delta summary table.
    Report(cmd::report::Args),
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Synth(args) => cmd::synth::run(&args),
        Command::Preprocess(args) => cmd::preprocess::run(&args),
        Command::Erp(args) => cmd::erp::run(&args),
        Command::Features(args) => cmd::features::run(&args),
        Command::Train(args) => cmd::train::run(&args),
        Command::Evaluate(args) => cmd::evaluate::run(&args),
        Command::Report(args) => cmd::report::run(&args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{}", error_line(&e));
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

/// Single-line machine-parsable form: `error[category]: message`.
fn error_line(e: &Error) -> String {
    let text = e.to_string();
    let prefix = format!("{}: ", e.category());
    let msg = text.strip_prefix(&prefix).unwrap_or(&text);
    format!("error[{}]: {}", e.category(), msg)
}
