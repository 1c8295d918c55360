mod batches;
mod corpus;
mod lr;
mod memplan;
mod transplant;

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use crate::args::Command;
use crate::CliError;

pub fn run(command: &Command, seed: Option<u64>) -> anyhow::Result<()> {
    match command {
        Command::Transplant(a) => transplant::run(a, seed),
        Command::PrepareCorpus(a) => corpus::prepare(a, seed),
        Command::SampleBatches(a) => batches::run(a),
        Command::LrCurve(a) => lr::run(a, seed),
        Command::Memplan(a) => memplan::run(a, seed),
        Command::Stats(a) => corpus::stats(a, seed),
    }
}

fn require_file(what: &str, path: &Path) -> Result<(), CliError> {
    if path.is_file() {
        Ok(())
    } else {
        Err(CliError::missing_input(what, path))
    }
}

fn require_dir(what: &str, path: &Path) -> Result<(), CliError> {
    if path.is_dir() {
        Ok(())
    } else {
        Err(CliError::missing_input(what, path))
    }
}

/// Fails early when an output cannot be created because its directory is
/// missing.
fn require_parent(what: &str, path: &Path) -> Result<(), CliError> {
    match path.parent() {
        Some(dir) if !dir.as_os_str().is_empty() && !dir.is_dir() => Err(CliError::missing_input(
            &format!("directory for {what}"),
            dir,
        )),
        _ => Ok(()),
    }
}

/// A buffered file, or the given standard stream when `path` is `None`
/// or `-`.
fn output(path: Option<&PathBuf>, stdout: bool) -> io::Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) if p.as_os_str() != "-" => Box::new(BufWriter::new(File::create(p)?)),
        _ if stdout => Box::new(BufWriter::new(io::stdout().lock())),
        _ => Box::new(BufWriter::new(io::stderr().lock())),
    })
}

fn seed_field(seed: Option<u64>) -> String {
    seed.map_or_else(|| "none".to_string(), |s| s.to_string())
}
