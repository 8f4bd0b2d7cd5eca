mod args;
mod commands;

use std::ffi::OsString;
use std::process::ExitCode;

use clap::Parser;

use args::Cli;
use commands::CliError;

fn main() -> ExitCode {
    switchid::exec::init_thread_pool_from_env();
    let raw: Vec<OsString> = std::env::args_os().collect();
    let argv = match expand_config(raw) {
        Ok(a) => a,
        Err(e) => return report(e),
    };
    let cli = Cli::parse_from(argv);
    match commands::run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => report(e),
    }
}

fn report(e: CliError) -> ExitCode {
    eprintln!("error: {e}");
    ExitCode::from(e.exit_code())
}

/// Appends `--key value` for every entry of the `--config` JSON object whose
/// flag is not already on the command line.
fn expand_config(mut argv: Vec<OsString>) -> Result<Vec<OsString>, CliError> {
    let strs: Vec<String> = argv.iter().map(|a| a.to_string_lossy().into_owned()).collect();
    let path = strs.iter().enumerate().find_map(|(i, a)| {
        if a == "--config" {
            strs.get(i + 1).cloned()
        } else {
            a.strip_prefix("--config=").map(str::to_owned)
        }
    });
    let Some(path) = path else { return Ok(argv) };
    let text = std::fs::read_to_string(&path).map_err(|e| CliError::Validation(format!("config {path}: {e}")))?;
    let value: serde_json::Value =
        serde_json::from_str(&text).map_err(|e| CliError::Validation(format!("config {path}: {e}")))?;
    let obj = value
        .as_object()
        .ok_or_else(|| CliError::Validation(format!("config {path}: expected a JSON object")))?;
    for (key, val) in obj {
        let flag = format!("--{}", key.replace('_', "-"));
        let present = strs.iter().any(|a| *a == flag || a.starts_with(&format!("{flag}=")));
        if present || flag == "--config" {
            continue;
        }
        let text = match val {
            serde_json::Value::Null | serde_json::Value::Bool(false) => continue,
            serde_json::Value::Bool(true) => {
                argv.push(flag.into());
                continue;
            }
            serde_json::Value::String(s) => s.clone(),
            serde_json::Value::Array(items) => items
                .iter()
                .map(|v| v.as_str().map(str::to_owned).unwrap_or_else(|| v.to_string()))
                .collect::<Vec<_>>()
                .join(","),
            other => other.to_string(),
        };
        argv.push(flag.into());
        argv.push(text.into());
    }
    Ok(argv)
}
