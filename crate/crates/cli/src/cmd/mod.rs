pub mod erp;
pub mod evaluate;
pub mod features;
pub mod preprocess;
pub mod report;
pub mod synth;
pub mod train;

use std::path::{Path, PathBuf};

use uercm_core::error::{Error, Result};

/// Expands each argument path into concrete data directories: a path
/// that itself contains `marker` counts as one directory; otherwise its
/// immediate children holding `marker` are taken, sorted by name.
pub fn discover_dirs(paths: &[PathBuf], marker: &str, kind: &str) -> Result<Vec<PathBuf>> {
    let mut out = Vec::new();
    for p in paths {
        if p.join(marker).is_file() {
            out.push(p.clone());
            continue;
        }
        if !p.is_dir() {
            return Err(Error::Config(format!("{}: not a directory", p.display())));
        }
        let mut children: Vec<PathBuf> = std::fs::read_dir(p)?
            .collect::<std::io::Result<Vec<_>>>()?
            .into_iter()
            .map(|e| e.path())
            .filter(|c| c.join(marker).is_file())
            .collect();
        children.sort();
        if children.is_empty() {
            return Err(Error::Config(format!(
                "{}: neither a {kind} directory nor a parent of one (no {marker} found)",
                p.display()
            )));
        }
        out.extend(children);
    }
    Ok(out)
}

/// Loads and concatenates feature CSVs in argument order.
pub fn load_feature_files(paths: &[PathBuf]) -> Result<Vec<uercm_core::features::WordFeatureVector>> {
    let mut words = Vec::new();
    for p in paths {
        words.extend(crate::features_io::read_features(p)?);
    }
    if words.is_empty() {
        return Err(Error::Data("feature files contain no rows".into()));
    }
    Ok(words)
}

pub fn path_str(p: &Path) -> String {
    p.display().to_string()
}
