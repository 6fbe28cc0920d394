//! Every run records its resolved configuration and the code version in
//! `<out>/run.lock`, so an output tree always names the inputs that
//! produced it. The record holds no timestamps: reruns stay
//! byte-identical.

use std::fmt::Write as _;
use std::path::Path;

use uercm_core::error::{Error, Result};

/// Writes `run.lock` with the subcommand name, package version, and the
/// resolved `(key, value)` configuration pairs, in the order given.
pub fn write_run_lock(out: &Path, subcommand: &str, config: &[(&str, String)]) -> Result<()> {
    std::fs::create_dir_all(out)?;
    let mut text = String::new();
    writeln!(text, "subcommand = {}", toml_string(subcommand)).expect("string write");
    writeln!(text, "version = {}", toml_string(env!("CARGO_PKG_VERSION"))).expect("string write");
    writeln!(text, "\n[config]").expect("string write");
    for (k, v) in config {
        writeln!(text, "{k} = {}", toml_string(v)).expect("string write");
    }
    let path = out.join("run.lock");
    std::fs::write(&path, text)
        .map_err(|e| Error::Io(std::io::Error::other(format!("writing {}: {e}", path.display()))))
}

fn toml_string(s: &str) -> String {
    toml::Value::String(s.to_string()).to_string()
}
