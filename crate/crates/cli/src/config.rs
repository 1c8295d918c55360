//! `key = value` configuration files and their merge with command-line
//! flags.
//!
//! Config entries are turned into flags and placed in front of the flags
//! the user typed; with `args_override_self` the later (typed) occurrence
//! wins. A key that names a flag of some other subcommand is ignored, so
//! one file can serve the whole pipeline.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::fs;
use std::path::Path;

use clap::{ArgAction, ArgMatches, Command};
use sha2::{Digest, Sha256};

use crate::CliError;

/// Global flags that take a value and may precede the subcommand.
const GLOBAL_VALUE_FLAGS: [&str; 2] = ["--config", "--run-log"];

pub fn parse_config(raw: &str) -> Result<Vec<(usize, String, String)>, CliError> {
    let mut out = Vec::new();
    for (n, line) in raw.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| CliError::config(format!("line {}: expected `key = value`", n + 1)))?;
        let key = key.trim().replace('_', "-");
        if key.is_empty() {
            return Err(CliError::config(format!("line {}: empty key", n + 1)));
        }
        out.push((n + 1, key, value.trim().to_string()));
    }
    Ok(out)
}

/// Finds `--config` and the subcommand position in raw argv.
fn scan(argv: &[OsString]) -> (Option<OsString>, Option<usize>) {
    let mut config = None;
    let mut i = 1;
    while i < argv.len() {
        let arg = argv[i].to_string_lossy();
        if let Some(v) = arg.strip_prefix("--config=") {
            config = Some(OsString::from(v));
        } else if arg == "--config" {
            config = argv.get(i + 1).cloned();
            i += 1;
        } else if GLOBAL_VALUE_FLAGS.contains(&arg.as_ref()) {
            i += 1;
        } else if arg == "--" {
            break;
        } else if !arg.starts_with('-') {
            // only the first positional can be the subcommand; `--config`
            // may still follow it
            let sub = i;
            let rest = scan(&[&[OsString::new()], &argv[sub + 1..]].concat()).0;
            return (config.or(rest), Some(sub));
        }
        i += 1;
    }
    (config, None)
}

/// Returns argv with config-file entries spliced in ahead of the user's
/// own flags.
pub fn merge_config(cmd: &Command, argv: Vec<OsString>) -> Result<Vec<OsString>, CliError> {
    let (config, sub_pos) = scan(&argv);
    let (Some(config), Some(sub_pos)) = (config, sub_pos) else {
        return Ok(argv);
    };
    let sub_name = argv[sub_pos].to_string_lossy().into_owned();
    let Some(sub) = cmd.find_subcommand(&sub_name) else {
        // let clap report the unknown subcommand
        return Ok(argv);
    };
    let path = Path::new(&config);
    let raw = fs::read_to_string(path)
        .map_err(|e| CliError::config(format!("cannot read config {}: {e}", path.display())))?;

    let mut globals = Vec::new();
    let mut locals = Vec::new();
    for (line, key, value) in parse_config(&raw)? {
        if key == "config" {
            return Err(CliError::config(format!("line {line}: config files cannot include other config files")));
        }
        let target = if let Some(arg) = find_long(cmd, &key) {
            Some((arg, &mut globals))
        } else {
            find_long(sub, &key).map(|arg| (arg, &mut locals))
        };
        match target {
            Some((arg, dest)) => {
                if matches!(arg.get_action(), ArgAction::SetTrue) {
                    match value.as_str() {
                        "true" | "yes" | "1" => dest.push(OsString::from(format!("--{key}"))),
                        "false" | "no" | "0" => {}
                        _ => return Err(CliError::config(format!("line {line}: {key} expects true or false"))),
                    }
                } else {
                    dest.push(OsString::from(format!("--{key}={value}")));
                }
            }
            None if cmd.get_subcommands().any(|s| find_long(s, &key).is_some()) => {}
            None => return Err(CliError::config(format!("line {line}: unknown key {key:?}"))),
        }
    }

    let mut merged = Vec::with_capacity(argv.len() + globals.len() + locals.len());
    merged.push(argv[0].clone());
    merged.extend(globals);
    merged.extend_from_slice(&argv[1..=sub_pos]);
    merged.extend(locals);
    merged.extend_from_slice(&argv[sub_pos + 1..]);
    Ok(merged)
}

fn find_long<'a>(cmd: &'a Command, key: &str) -> Option<&'a clap::Arg> {
    cmd.get_arguments().find(|a| a.get_long() == Some(key))
}

/// Hash of the resolved settings of a subcommand: every argument value,
/// whether typed, read from the config file, the environment or a
/// default. Equal settings give equal hashes however they were supplied.
pub fn settings_hash(sub: &Command, matches: &ArgMatches) -> String {
    let mut settings = BTreeMap::new();
    for arg in sub.get_arguments() {
        let id = arg.get_id().as_str();
        if matches!(id, "config" | "run_log" | "help" | "version") {
            continue;
        }
        if let Ok(Some(values)) = matches.try_get_raw(id) {
            let joined: Vec<String> = values.map(|v| v.to_string_lossy().into_owned()).collect();
            settings.insert(id.to_string(), joined.join("\u{1f}"));
        }
    }
    let mut hasher = Sha256::new();
    for (k, v) in &settings {
        hasher.update(k.as_bytes());
        hasher.update(b"=");
        hasher.update(v.as_bytes());
        hasher.update(b"\n");
    }
    hasher.finalize().iter().map(|b| format!("{b:02x}")).collect()
}
