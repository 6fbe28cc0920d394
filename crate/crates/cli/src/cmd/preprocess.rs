//! `uercm preprocess`: sessions in, clean epoch archives and rejection
//! reports out. Sessions are only ever read.

use std::path::PathBuf;

use clap::Parser;

use uercm_core::error::Result;
use uercm_core::session_io::{read_session, write_epochs, MANIFEST_FILE};
use uercm_core::signal::preprocess_session;

use crate::cmd::{discover_dirs, path_str};
use crate::runlock::write_run_lock;
use crate::workers::{parallel_map, worker_count};

#[derive(Parser)]
pub struct Args {
    /// Session directory, or a directory of session directories.
    /// Repeatable.
    #[arg(long = "session", required = true)]
    pub sessions: Vec<PathBuf>,
    /// Output directory; one epoch archive per participant appears
    /// under it.
    #[arg(long)]
    pub out: PathBuf,
}

pub fn run(args: &Args) -> Result<()> {
    let dirs = discover_dirs(&args.sessions, MANIFEST_FILE, "session")?;
    std::fs::create_dir_all(&args.out)?;

    let summaries = parallel_map(dirs.len(), worker_count()?, |i| {
        let rec = read_session(&dirs[i])?;
        let (epochs, report) = preprocess_session(&rec)?;
        write_epochs(&args.out.join(&rec.participant_id), &epochs, &report)?;
        Ok(format!(
            "{}: {} word triggers, {} kept, {} rejected, {} skipped",
            rec.participant_id,
            report.total_word_triggers,
            report.kept,
            report.rejected.len(),
            report.skipped.len()
        ))
    })?;
    for line in &summaries {
        println!("{line}");
    }

    let inputs: Vec<String> = dirs.iter().map(|d| path_str(d)).collect();
    write_run_lock(
        &args.out,
        "preprocess",
        &[("sessions", inputs.join(","))],
    )
}
