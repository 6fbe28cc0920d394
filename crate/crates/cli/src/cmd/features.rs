//! `uercm features`: epoch archives in, one labeled 69-column feature
//! table out.

use std::path::PathBuf;

use clap::Parser;

use uercm_core::error::{Error, Result};
use uercm_core::features::word_feature_vector;
use uercm_core::montage::RoiMap;
use uercm_core::session_io::{read_epochs, EPOCHS_MANIFEST_FILE};

use crate::cmd::{discover_dirs, path_str};
use crate::features_io::write_features;
use crate::runlock::write_run_lock;
use crate::workers::{parallel_map, worker_count};

#[derive(Parser)]
pub struct Args {
    /// Epoch archive directory, or a directory of archives. Repeatable.
    #[arg(long = "epochs", required = true)]
    pub epochs: Vec<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
}

pub fn run(args: &Args) -> Result<()> {
    let dirs = discover_dirs(&args.epochs, EPOCHS_MANIFEST_FILE, "epoch archive")?;
    let roi_map = RoiMap::default();

    let per_dir = parallel_map(dirs.len(), worker_count()?, |i| {
        let (epochs, _) = read_epochs(&dirs[i])?;
        epochs.iter().map(|e| word_feature_vector(e, &roi_map)).collect::<Result<Vec<_>>>()
    })?;
    let words: Vec<_> = per_dir.into_iter().flatten().collect();
    if words.is_empty() {
        return Err(Error::Data("no epochs in the given archives".into()));
    }

    std::fs::create_dir_all(&args.out)?;
    let csv_path = args.out.join("features.csv");
    write_features(&csv_path, &words)?;
    println!("{} word vectors -> {}", words.len(), csv_path.display());

    let inputs: Vec<String> = dirs.iter().map(|d| path_str(d)).collect();
    write_run_lock(
        &args.out,
        "features",
        &[("epochs", inputs.join(","))],
    )
}
