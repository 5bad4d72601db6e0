//! Config files and their merge with command-line flags.
//!
//! A config file is flat `key = value` text (`#` starts a comment) whose keys are the long
//! flag names of the chosen subcommand. A run manifest written by any command is also
//! accepted, so an artifact can be regenerated from the manifest next to it. Values from the
//! file are spliced in front of the explicit flags, and every flag keeps its last
//! occurrence, so explicit flags win. The output directory may also come from
//! [`OUT_DIR_ENV`], which sits between the file and the flags.

use std::ffi::OsString;
use std::path::Path;

use serde_json::Value;

use crate::error::CliError;

pub const OUT_DIR_ENV: &str = "STABLASSO_OUT_DIR";

/// Rewrites `argv` so that config-file values and the output-directory override precede
/// the explicit flags.
pub fn expand_args(
    argv: Vec<OsString>,
    env_out: Option<OsString>,
) -> Result<Vec<OsString>, CliError> {
    if argv.len() < 2 {
        return Ok(argv);
    }
    let command = argv[1].clone();
    let mut explicit = Vec::new();
    let mut config_path: Option<OsString> = None;
    let mut rest = argv[2..].iter();
    while let Some(arg) = rest.next() {
        let text = arg.to_string_lossy();
        if text == "--config" {
            let path = rest
                .next()
                .ok_or_else(|| CliError::config("--config needs a file path"))?;
            config_path = Some(path.clone());
        } else if let Some(path) = text.strip_prefix("--config=") {
            config_path = Some(path.into());
        } else {
            explicit.push(arg.clone());
        }
    }

    let mut expanded = vec![argv[0].clone(), command.clone()];
    if let Some(path) = config_path {
        let pairs = read_config(Path::new(&path), &command.to_string_lossy())?;
        for (key, value) in pairs {
            expanded.push(format!("--{key}={value}").into());
        }
    }
    if let Some(dir) = env_out {
        let mut flag = OsString::from("--out=");
        flag.push(dir);
        expanded.push(flag);
    }
    expanded.extend(explicit);
    Ok(expanded)
}

/// Reads `key = value` pairs from a flat config file or from a run manifest.
pub fn read_config(path: &Path, command: &str) -> Result<Vec<(String, String)>, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::config(format!("cannot read config {}: {e}", path.display())))?;
    if text.trim_start().starts_with('{') {
        return manifest_pairs(&text, command, path);
    }
    let mut pairs = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line.split_once('=').ok_or_else(|| {
            CliError::config(format!(
                "{}:{}: expected `key = value`",
                path.display(),
                lineno + 1
            ))
        })?;
        let key = normalize_key(key);
        if key.is_empty() || key == "config" {
            return Err(CliError::config(format!(
                "{}:{}: invalid key",
                path.display(),
                lineno + 1
            )));
        }
        pairs.push((key, value.trim().to_string()));
    }
    Ok(pairs)
}

fn normalize_key(key: &str) -> String {
    key.trim().replace('_', "-")
}

fn manifest_pairs(
    text: &str,
    command: &str,
    path: &Path,
) -> Result<Vec<(String, String)>, CliError> {
    let manifest: Value = serde_json::from_str(text)
        .map_err(|e| CliError::config(format!("{} is not valid JSON: {e}", path.display())))?;
    match manifest.get("command").and_then(Value::as_str) {
        Some(c) if c == command => {}
        Some(c) => {
            return Err(CliError::config(format!(
                "{} is a manifest for `{c}`, not `{command}`",
                path.display()
            )))
        }
        None => {
            return Err(CliError::config(format!(
                "{} has no `command` field",
                path.display()
            )))
        }
    }
    let Some(Value::Object(config)) = manifest.get("config") else {
        return Err(CliError::config(format!(
            "{} has no `config` object",
            path.display()
        )));
    };
    let mut pairs = Vec::new();
    for (key, value) in config {
        let rendered = match value {
            Value::Null => continue,
            Value::String(s) => s.clone(),
            Value::Array(items) => items
                .iter()
                .map(|v| match v {
                    Value::String(s) => s.clone(),
                    other => other.to_string(),
                })
                .collect::<Vec<_>>()
                .join(","),
            other => other.to_string(),
        };
        pairs.push((normalize_key(key), rendered));
    }
    Ok(pairs)
}
