//! Run configuration: defaults, then a TOML file, then command-line flags.

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::de::DeserializeOwned;
use serde::Serialize;
use serde_json::{Map, Value};

/// Bad input from the user: flags, config files, or values that fail validation.
#[derive(Debug)]
pub struct UsageError(pub String);

impl fmt::Display for UsageError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

/// A verification command found a violation.
#[derive(Debug)]
pub struct AcceptanceFailure(pub String);

impl fmt::Display for AcceptanceFailure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for AcceptanceFailure {}

pub fn usage(msg: impl Into<String>) -> anyhow::Error {
    UsageError(msg.into()).into()
}

fn as_object(value: Value, what: &str) -> Result<Map<String, Value>> {
    match value {
        Value::Object(map) => Ok(map),
        _ => Err(usage(format!("{what} is not a key-value table"))),
    }
}

/// Layers `file` and then `flags` over `T::default()`.
///
/// `flags` is any serializable struct whose `None` fields mean "not given";
/// its keys and the file's keys must be fields of `T`.
pub fn resolve<T, F>(file: Option<&Path>, flags: &F) -> Result<T>
where
    T: Serialize + DeserializeOwned + Default,
    F: Serialize,
{
    let mut merged = as_object(serde_json::to_value(T::default())?, "defaults")?;
    if let Some(path) = file {
        let text = fs::read_to_string(path)
            .with_context(|| format!("reading config file {}", path.display()))?;
        let table: Value = toml::from_str(&text)
            .map_err(|e| usage(format!("config file {}: {e}", path.display())))?;
        for (key, value) in as_object(table, "config file")? {
            if !merged.contains_key(&key) {
                return Err(usage(format!(
                    "config file {}: unknown key `{key}`",
                    path.display()
                )));
            }
            merged.insert(key, value);
        }
    }
    for (key, value) in as_object(serde_json::to_value(flags)?, "flags")? {
        if !value.is_null() {
            merged.insert(key, value);
        }
    }
    serde_json::from_value(Value::Object(merged)).map_err(|e| usage(format!("configuration: {e}")))
}

/// Creates the output directory and writes `manifest.json` into it.
pub fn write_manifest<T: Serialize>(dir: &Path, command: &str, seed: u64, config: &T) -> Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let manifest = serde_json::json!({
        "command": command,
        "version": env!("CARGO_PKG_VERSION"),
        "seed": seed,
        "config": config,
    });
    let path = dir.join("manifest.json");
    fs::write(&path, serde_json::to_string_pretty(&manifest)? + "\n")
        .with_context(|| format!("writing {}", path.display()))
}

pub fn write_csv<T: Serialize>(path: &Path, rows: &[T]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).with_context(|| format!("creating {}", path.display()))?;
    for row in rows {
        w.serialize(row)?;
    }
    w.flush()?;
    Ok(())
}

pub fn parse_list<T: std::str::FromStr>(text: &str, what: &str) -> Result<Vec<T>> {
    text.split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| {
            s.parse::<T>()
                .map_err(|_| usage(format!("cannot parse `{s}` in {what}")))
        })
        .collect()
}

/// Sizes the global thread pool; zero keeps the default.
pub fn init_threads(threads: usize) -> Result<()> {
    if threads > 0 {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()
            .context("configuring the thread pool")?;
    }
    Ok(())
}

pub fn out_dir(dir: &str) -> PathBuf {
    PathBuf::from(dir)
}
