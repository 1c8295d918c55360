mod args;
mod cmd;
mod config;
mod runlog;

use std::env;
use std::fmt;
use std::process::ExitCode;

use clap::{CommandFactory, FromArgMatches};
use warmstart_core::batcher::BatchError;
use warmstart_core::corpus::StoreError;
use warmstart_core::masking::MaskError;
use warmstart_core::schedule::ScheduleError;
use warmstart_core::translate::TranslateError;
use warmstart_core::transplant::{EmbeddingError, TransplantError};
use warmstart_core::vocab::VocabError;

use crate::args::{Cli, Command};
use crate::runlog::RunRecord;

/// Failures detected by the CLI itself rather than a library module.
#[derive(Debug)]
pub struct CliError {
    pub code: &'static str,
    pub message: String,
}

impl CliError {
    pub fn config(message: impl Into<String>) -> Self {
        CliError {
            code: "config",
            message: message.into(),
        }
    }

    pub fn missing_input(what: &str, path: &std::path::Path) -> Self {
        CliError {
            code: "missing-input",
            message: format!("{what} {} does not exist", path.display()),
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

impl std::error::Error for CliError {}

/// Short machine-readable class of an error, taken from the innermost
/// recognized cause.
fn error_code(err: &anyhow::Error) -> &'static str {
    for cause in err.chain() {
        if let Some(e) = cause.downcast_ref::<CliError>() {
            return e.code;
        }
        let code = if cause.is::<VocabError>() {
            "vocab"
        } else if cause.is::<EmbeddingError>() {
            "embedding"
        } else if cause.is::<TransplantError>() {
            "transplant"
        } else if cause.is::<TranslateError>() {
            "translate"
        } else if cause.is::<StoreError>() {
            "store"
        } else if cause.is::<MaskError>() {
            "mask"
        } else if cause.is::<BatchError>() {
            "batch"
        } else if cause.is::<ScheduleError>() {
            "schedule"
        } else {
            continue;
        };
        return code;
    }
    if err.chain().any(|c| c.is::<std::io::Error>()) {
        "io"
    } else {
        "error"
    }
}

fn command() -> clap::Command {
    Cli::command().mut_subcommands(|s| s.args_override_self(true))
}

fn main() -> ExitCode {
    let cmd = command();
    let argv = match config::merge_config(&cmd, env::args_os().collect()) {
        Ok(argv) => argv,
        Err(e) => {
            eprintln!("error: code={} message={:?}", e.code, e.message);
            return ExitCode::from(1);
        }
    };
    let matches = match cmd.clone().try_get_matches_from(argv) {
        Ok(m) => m,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(e.exit_code() as u8);
        }
    };
    let cli = match Cli::from_arg_matches(&matches) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(2);
        }
    };

    let name = cli.command.name();
    let sub_matches = matches.subcommand_matches(name).expect("parsed subcommand");
    let sub_cmd = cmd.find_subcommand(name).expect("known subcommand");
    let hash = config::settings_hash(sub_cmd, sub_matches);
    let seed = match &cli.command {
        Command::SampleBatches(a) => Some(a.seed),
        _ => env::var("WARMSTART_SEED").ok().and_then(|s| s.parse().ok()),
    };

    let result = cmd::run(&cli.command, seed);
    let record = RunRecord {
        subcommand: name,
        config_hash: &hash,
        seed,
        status: if result.is_ok() { "ok" } else { "error" },
    };
    if let Err(e) = record.append_to(&cli.run_log) {
        eprintln!("warning: cannot append to run log {}: {e}", cli.run_log.display());
    }
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: code={} message={:?}", error_code(&e), format!("{e:#}"));
            ExitCode::from(1)
        }
    }
}
