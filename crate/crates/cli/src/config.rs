//! Settings file support. A settings file is a flat TOML table (or a JSON
//! object, or a run manifest, whose `config` object is used) whose keys match
//! the long flag names with dashes replaced by underscores. Flags given on
//! the command line take precedence over the file.

use std::fs;
use std::path::{Path, PathBuf};

use resil_core::{Error, Result};
use serde::{Deserialize, Serialize};

pub const THREADS_ENV: &str = "RESIL_THREADS";

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub threads: Option<usize>,
    pub out: Option<PathBuf>,
    pub model: Option<PathBuf>,
    pub data: Option<PathBuf>,
    pub layer: Option<String>,
    pub faults: Option<String>,
    pub reps: Option<usize>,
    pub seed: Option<u64>,
    pub shared_fault: Option<bool>,
    pub mult: Option<String>,
    pub fraction: Option<f64>,
    pub luts: Option<PathBuf>,
    pub builtin: Option<bool>,
    pub wvar: Option<f64>,
    pub wrms: Option<f64>,
    pub fi: Option<Vec<PathBuf>>,
    pub apx: Option<Vec<PathBuf>>,
    pub format: Option<String>,
    pub images: Option<u64>,
    pub tfi: Option<f64>,
    pub tapx: Option<f64>,
    pub report: Option<PathBuf>,
    pub dump_traces: Option<PathBuf>,
}

pub fn load(path: &Path) -> Result<FileConfig> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let parse_err = |reason: String| Error::Parse {
        path: path.to_path_buf(),
        reason,
    };
    let is_json = path.extension().is_some_and(|e| e.eq_ignore_ascii_case("json"));
    if is_json {
        let mut value: serde_json::Value = serde_json::from_str(&text).map_err(|e| parse_err(e.to_string()))?;
        if let Some(inner) = value.get_mut("config") {
            value = inner.take();
        }
        serde_json::from_value(value).map_err(|e| parse_err(e.to_string()))
    } else {
        toml::from_str(&text).map_err(|e| parse_err(e.to_string()))
    }
}

/// Worker count: flag, then settings file, then the environment.
pub fn resolve_threads(flag: Option<usize>, file: &FileConfig) -> Result<Option<usize>> {
    let n = match flag.or(file.threads) {
        Some(n) => Some(n),
        None => match std::env::var(THREADS_ENV) {
            Ok(v) if !v.trim().is_empty() => Some(
                v.trim()
                    .parse::<usize>()
                    .map_err(|_| Error::Config(format!("{THREADS_ENV}={v} is not a thread count")))?,
            ),
            _ => None,
        },
    };
    if n == Some(0) {
        return Err(Error::Config("thread count must be at least 1".into()));
    }
    Ok(n)
}

pub fn required<T>(value: Option<T>, key: &str) -> Result<T> {
    value.ok_or_else(|| Error::Config(format!("missing --{} (flag or settings key `{key}`)", key.replace('_', "-"))))
}
