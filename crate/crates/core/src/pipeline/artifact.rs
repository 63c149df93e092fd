use std::io::Write;
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use super::TOOL_VERSION;
use crate::density::{csv_err, format_f64};
use crate::error::{Error, Result};

/// Environment variable naming the cache directory; `<out>/.cache` otherwise.
pub const CACHE_ENV: &str = "VACPOL_CACHE_DIR";

/// JSON payload stamped with its provenance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Artifact<T> {
    pub kind: String,
    pub tool_version: String,
    pub config_hash: String,
    pub data: T,
}

impl<T: Serialize> Artifact<T> {
    pub fn new(kind: &str, config_hash: &str, data: T) -> Self {
        Artifact { kind: kind.to_string(), tool_version: TOOL_VERSION.to_string(), config_hash: config_hash.to_string(), data }
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let mut text = serde_json::to_string_pretty(self).map_err(|e| Error::Serde(e.to_string()))?;
        text.push('\n');
        write_atomic(path, text.as_bytes())
    }
}

impl<T: DeserializeOwned> Artifact<T> {
    /// Reads an upstream artifact; a missing file names the stage producing it.
    pub fn read(path: &Path, stage: &'static str) -> Result<Self> {
        if !path.exists() {
            return Err(Error::MissingUpstream { stage, path: path.to_path_buf() });
        }
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::Serde(format!("{}: {e}", path.display())))
    }
}

pub fn cache_dir(out: &Path) -> PathBuf {
    match std::env::var_os(CACHE_ENV) {
        Some(dir) if !dir.is_empty() => PathBuf::from(dir),
        _ => out.join(".cache"),
    }
}

pub(crate) fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    let tmp = path.with_extension("tmp");
    std::fs::write(&tmp, bytes).map_err(|e| Error::io(&tmp, e))?;
    std::fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
}

/// Loads `<dir>/<key>.json` or computes and stores it. The flag is true on a hit.
pub(crate) fn cached<T, F>(dir: &Path, key: &str, compute: F) -> Result<(T, bool)>
where
    T: Serialize + DeserializeOwned,
    F: FnOnce() -> Result<T>,
{
    let path = dir.join(format!("{key}.json"));
    if let Ok(text) = std::fs::read_to_string(&path) {
        match serde_json::from_str(&text) {
            Ok(v) => return Ok((v, true)),
            Err(e) => log::warn!("ignoring unreadable cache entry {}: {e}", path.display()),
        }
    }
    let value = compute()?;
    let text = serde_json::to_string(&value).map_err(|e| Error::Serde(e.to_string()))?;
    write_atomic(&path, text.as_bytes())?;
    Ok((value, false))
}

pub(crate) fn provenance(kind: &str, config_hash: &str) -> Vec<String> {
    vec![kind.to_string(), format!("tool_version {TOOL_VERSION}"), format!("config_hash {config_hash}")]
}

/// Numeric CSV with `#` header lines.
pub(crate) fn write_table(path: &Path, header: &[String], columns: &[&str], rows: &[Vec<f64>]) -> Result<()> {
    let mut buf = Vec::new();
    for line in header {
        writeln!(buf, "# {line}").map_err(|e| Error::io(path, e))?;
    }
    {
        let mut w = csv::Writer::from_writer(&mut buf);
        w.write_record(columns).map_err(csv_err)?;
        for row in rows {
            w.write_record(row.iter().map(|v| format_f64(*v))).map_err(csv_err)?;
        }
        w.flush().map_err(|e| Error::io(path, e))?;
    }
    write_atomic(path, &buf)
}
