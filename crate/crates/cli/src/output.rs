//! CSV tables and the run manifest.

use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::params::Params;
use crate::CliError;

/// 17 significant digits, enough to round-trip any `f64`.
pub fn float(x: f64) -> String {
    if x.is_nan() {
        "NaN".to_string()
    } else {
        format!("{x:.16e}")
    }
}

/// Undefined values are written as `NaN`.
pub fn maybe(x: Option<f64>) -> String {
    float(x.unwrap_or(f64::NAN))
}

pub struct Table {
    header: &'static [&'static str],
    rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(header: &'static [&'static str]) -> Self {
        Self {
            header,
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(self.header).expect("writing to memory");
        for row in &self.rows {
            w.write_record(row).expect("writing to memory");
        }
        w.into_inner().expect("writing to memory")
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Artifact {
    pub file: String,
    pub rows: usize,
    pub sha256: String,
}

fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    std::fs::write(path, bytes).map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// Collects the files of one run and writes them with a manifest.
pub struct Output {
    dir: PathBuf,
    artifacts: Vec<Artifact>,
}

impl Output {
    pub fn create(dir: &Path) -> Result<Self, CliError> {
        std::fs::create_dir_all(dir).map_err(|source| CliError::Io {
            path: dir.to_path_buf(),
            source,
        })?;
        Ok(Self {
            dir: dir.to_path_buf(),
            artifacts: Vec::new(),
        })
    }

    pub fn table(&mut self, name: &str, table: &Table) -> Result<(), CliError> {
        self.bytes(name, &table.to_bytes(), table.rows.len())
    }

    pub fn json(&mut self, name: &str, value: &serde_json::Value) -> Result<(), CliError> {
        let mut text = serde_json::to_string_pretty(value).expect("json values serialize");
        text.push('\n');
        self.bytes(name, text.as_bytes(), 0)
    }

    fn bytes(&mut self, name: &str, bytes: &[u8], rows: usize) -> Result<(), CliError> {
        let path = self.dir.join(name);
        write_file(&path, bytes)?;
        log::info!("wrote {}", path.display());
        self.artifacts.push(Artifact {
            file: name.to_string(),
            rows,
            sha256: sha256_hex(bytes),
        });
        Ok(())
    }

    /// `manifest.json` with the effective parameters and artifact hashes.
    /// The timestamp lives only here, so the data files of a rerun match
    /// byte for byte.
    pub fn finish(self, command: &str, params: &Params, extra: serde_json::Value) -> Result<PathBuf, CliError> {
        let manifest = serde_json::json!({
            "tool": "glassotto",
            "version": env!("CARGO_PKG_VERSION"),
            "command": command,
            "created": chrono::Utc::now().to_rfc3339(),
            "seed": params.seed,
            "params": params,
            "artifacts": self.artifacts,
            "run": extra,
        });
        let path = self.dir.join("manifest.json");
        let mut text = serde_json::to_string_pretty(&manifest).expect("json values serialize");
        text.push('\n');
        write_file(&path, text.as_bytes())?;
        Ok(path)
    }
}
