//! `--config FILE` support.
//!
//! Keys of the JSON object mirror long flag names (`targets-x` or
//! `targets_x`). Each entry is turned into `--key=value` tokens inserted
//! right after the subcommand; keys also given on the command line are
//! skipped, so explicit flags win.

use std::ffi::{OsStr, OsString};
use std::fs;

use serde_json::Value;

fn flag_of(arg: &OsStr) -> Option<String> {
    let s = arg.to_str()?;
    let body = s.strip_prefix("--")?;
    Some(body.split('=').next().unwrap_or(body).to_string())
}

fn config_path(argv: &[OsString]) -> Option<OsString> {
    let mut it = argv.iter();
    while let Some(arg) = it.next() {
        let s = arg.to_string_lossy();
        if s == "--config" {
            return it.next().cloned();
        }
        if let Some(p) = s.strip_prefix("--config=") {
            return Some(p.into());
        }
    }
    None
}

fn subcommand_index(argv: &[OsString]) -> Option<usize> {
    argv.iter()
        .enumerate()
        .skip(1)
        .find(|(_, a)| !a.to_string_lossy().starts_with('-'))
        .map(|(i, _)| i)
}

fn scalar(key: &str, v: &Value) -> Result<Option<String>, String> {
    match v {
        Value::Null => Ok(None),
        Value::Bool(b) => Ok(Some(b.to_string())),
        Value::Number(n) => Ok(Some(n.to_string())),
        Value::String(s) => Ok(Some(s.clone())),
        _ => Err(format!("config key {key:?}: expected a scalar or a list of scalars")),
    }
}

/// Return `argv` with the config file's entries spliced in.
pub fn expand(argv: Vec<OsString>) -> Result<Vec<OsString>, String> {
    let Some(path) = config_path(&argv) else {
        return Ok(argv);
    };
    let Some(at) = subcommand_index(&argv) else {
        return Ok(argv);
    };
    let shown = path.to_string_lossy().into_owned();
    let text = fs::read_to_string(&path).map_err(|e| format!("cannot read config file {shown}: {e}"))?;
    let value: Value = serde_json::from_str(&text).map_err(|e| format!("config file {shown}: {e}"))?;
    let Value::Object(map) = value else {
        return Err(format!("config file {shown}: top level must be a JSON object"));
    };

    let given: Vec<String> = argv[at + 1..].iter().filter_map(|a| flag_of(a)).collect();
    let mut extra: Vec<OsString> = Vec::new();
    for (key, v) in &map {
        let flag = key.replace('_', "-");
        if flag == "config" {
            return Err(format!("config file {shown}: key \"config\" is not allowed"));
        }
        if given.contains(&flag) {
            continue;
        }
        let values = match v {
            Value::Array(items) => items.iter().map(|i| scalar(key, i)).collect::<Result<Vec<_>, _>>()?,
            other => vec![scalar(key, other)?],
        };
        for value in values.into_iter().flatten() {
            extra.push(format!("--{flag}={value}").into());
        }
    }
    let mut out = argv;
    out.splice(at + 1..at + 1, extra);
    Ok(out)
}
