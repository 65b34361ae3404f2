//! `--config` files: TOML values spliced into the argument list ahead of the
//! user's own flags, which therefore take precedence.

use std::ffi::OsString;
use std::fs;
use std::path::PathBuf;

use clap::CommandFactory;

use crate::args::{Cli, Command};
use crate::CliError;

/// Returns `argv` with the config file's flags inserted right after the
/// subcommand name, or unchanged when no `--config` is given.
pub fn expand(argv: Vec<OsString>) -> Result<Vec<OsString>, CliError> {
    let Some(path) = find_config(&argv) else {
        return Ok(argv);
    };
    let Some(position) = argv
        .iter()
        .position(|a| a.to_str().is_some_and(|s| Command::NAMES.contains(&s)))
    else {
        return Ok(argv);
    };
    let command = argv[position].to_string_lossy().into_owned();
    let text = fs::read_to_string(&path).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?;
    let table: toml::Table = text
        .parse()
        .map_err(|e: toml::de::Error| CliError::Usage(format!("{}: {}", path.display(), e.message())))?;

    let mut injected = Vec::new();
    for (key, value) in &table {
        match value {
            toml::Value::Table(section) => {
                if !Command::NAMES.contains(&key.as_str()) {
                    return Err(CliError::Usage(format!("{}: unknown section [{key}]", path.display())));
                }
                for (k, v) in section {
                    if !accepts(key, k) {
                        return Err(CliError::Usage(format!("{}: [{key}] has no flag --{}", path.display(), flag(k))));
                    }
                    if *key == command {
                        push_flag(&mut injected, k, v, &path)?;
                    }
                }
            }
            _ => {
                if !Command::NAMES.iter().any(|c| accepts(c, key)) {
                    return Err(CliError::Usage(format!("{}: no command has a flag --{}", path.display(), flag(key))));
                }
                if accepts(&command, key) {
                    push_flag(&mut injected, key, value, &path)?;
                }
            }
        }
    }
    let mut out = argv[..=position].to_vec();
    out.extend(injected);
    out.extend_from_slice(&argv[position + 1..]);
    Ok(out)
}

fn find_config(argv: &[OsString]) -> Option<PathBuf> {
    let mut iter = argv.iter().skip(1);
    while let Some(arg) = iter.next() {
        let s = arg.to_string_lossy();
        if s == "--config" {
            return iter.next().map(PathBuf::from);
        }
        if let Some(rest) = s.strip_prefix("--config=") {
            return Some(PathBuf::from(rest));
        }
    }
    None
}

fn flag(key: &str) -> String {
    key.replace('_', "-")
}

fn accepts(command: &str, key: &str) -> bool {
    let name = flag(key);
    name != "config"
        && Cli::command()
            .find_subcommand(command)
            .is_some_and(|c| c.get_arguments().any(|a| a.get_long() == Some(name.as_str())))
}

fn push_flag(out: &mut Vec<OsString>, key: &str, value: &toml::Value, path: &std::path::Path) -> Result<(), CliError> {
    let rendered = match value {
        toml::Value::String(s) => s.clone(),
        toml::Value::Integer(i) => i.to_string(),
        toml::Value::Float(f) => f.to_string(),
        toml::Value::Boolean(b) => b.to_string(),
        other => {
            return Err(CliError::Usage(format!(
                "{}: value of {key} must be a string, number or boolean, got {}",
                path.display(),
                other.type_str()
            )))
        }
    };
    out.push(format!("--{}", flag(key)).into());
    out.push(rendered.into());
    Ok(())
}
