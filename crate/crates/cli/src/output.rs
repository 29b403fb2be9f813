//! Output staging, manifests and small CSV/JSON helpers.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use roughnas::pipeline::write_atomic;
use roughnas::{Error, PipelineConfig};
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::CliError;

pub const MANIFEST_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, Serialize)]
pub struct InputDigest {
    pub role: String,
    pub path: String,
    pub sha256: String,
}

/// Everything needed to repeat a command: its arguments, the effective
/// config, digests of every input file and per-stage timings.
#[derive(Debug, Clone, Serialize)]
pub struct RunManifest {
    pub format_version: u32,
    pub tool: &'static str,
    pub tool_version: &'static str,
    pub command: String,
    pub args: Vec<String>,
    pub seed: Option<u64>,
    pub config: Option<PipelineConfig>,
    pub inputs: Vec<InputDigest>,
    pub outputs: Vec<String>,
    pub timings: Vec<(String, f64)>,
}

/// Collects a command's outputs in memory; nothing touches the output
/// directory until [`Staged::commit`], so a failing command leaves no files.
pub struct Staged {
    started: Instant,
    files: Vec<(String, Vec<u8>)>,
    manifest: RunManifest,
}

impl Staged {
    pub fn new(command: &str) -> Self {
        Self {
            started: Instant::now(),
            files: Vec::new(),
            manifest: RunManifest {
                format_version: MANIFEST_FORMAT_VERSION,
                tool: env!("CARGO_PKG_NAME"),
                tool_version: env!("CARGO_PKG_VERSION"),
                command: command.to_string(),
                args: std::env::args().skip(1).collect(),
                seed: None,
                config: None,
                inputs: Vec::new(),
                outputs: Vec::new(),
                timings: Vec::new(),
            },
        }
    }

    pub fn config(&mut self, cfg: &PipelineConfig) {
        self.manifest.seed = Some(cfg.seed);
        self.manifest.config = Some(cfg.clone());
    }

    pub fn input(&mut self, role: &str, path: &Path) -> Result<(), CliError> {
        let bytes = fs::read(path).map_err(|e| CliError::from(Error::io(path, e)))?;
        self.manifest.inputs.push(InputDigest {
            role: role.to_string(),
            path: path.display().to_string(),
            sha256: hex::encode(Sha256::digest(&bytes)),
        });
        Ok(())
    }

    pub fn timings(&mut self, entries: &[(String, f64)]) {
        self.manifest.timings.extend_from_slice(entries);
    }

    pub fn file(&mut self, name: &str, bytes: Vec<u8>) {
        self.manifest.outputs.push(name.to_string());
        self.files.push((name.to_string(), bytes));
    }

    pub fn json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<(), CliError> {
        self.file(name, to_json(value)?);
        Ok(())
    }

    /// Writes every staged file, then `manifest.json`, each via
    /// write-to-temp-then-rename.
    pub fn commit(mut self, out: &Path) -> Result<Vec<PathBuf>, CliError> {
        fs::create_dir_all(out).map_err(|e| CliError::from(Error::io(out, e)))?;
        self.manifest
            .timings
            .push(("total".to_string(), self.started.elapsed().as_secs_f64()));
        let manifest = to_json(&self.manifest)?;
        self.files.push(("manifest.json".to_string(), manifest));
        let mut written = Vec::new();
        for (name, bytes) in &self.files {
            let path = out.join(name);
            write_atomic(&path, bytes)?;
            written.push(path);
        }
        Ok(written)
    }
}

pub fn to_json<T: Serialize>(value: &T) -> Result<Vec<u8>, CliError> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| CliError::runtime(e.to_string()))?;
    text.push('\n');
    Ok(text.into_bytes())
}

pub fn jsonl<T: Serialize>(records: &[T]) -> Result<Vec<u8>, CliError> {
    let mut out = Vec::new();
    for r in records {
        serde_json::to_writer(&mut out, r).map_err(|e| CliError::runtime(e.to_string()))?;
        out.push(b'\n');
    }
    Ok(out)
}

/// Serializes rows of string cells under `header`.
pub fn csv_bytes<I, R>(header: &[&str], rows: I) -> Result<Vec<u8>, CliError>
where
    I: IntoIterator<Item = R>,
    R: IntoIterator<Item = String>,
{
    let mut w = csv::Writer::from_writer(Vec::new());
    let err = |e: csv::Error| CliError::runtime(e.to_string());
    w.write_record(header).map_err(err)?;
    for row in rows {
        w.write_record(row).map_err(err)?;
    }
    w.into_inner().map_err(|e| CliError::runtime(e.to_string()))
}

/// Shortest decimal text that parses back to the same `f64`.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:?}")
}

pub fn fmt_opt(v: Option<f64>) -> String {
    v.map(fmt_f64).unwrap_or_default()
}

/// Numeric CSV with a header row; returns `(header, rows)`.
pub fn read_numeric_csv(path: &Path) -> Result<(Vec<String>, Vec<Vec<f64>>), CliError> {
    let file = fs::File::open(path).map_err(|e| CliError::from(Error::io(path, e)))?;
    let mut rdr = csv::Reader::from_reader(file);
    let data_err = |m: String| CliError::data(format!("{}: {m}", path.display()));
    let header: Vec<String> = rdr
        .headers()
        .map_err(|e| data_err(e.to_string()))?
        .iter()
        .map(|h| h.trim().to_string())
        .collect();
    let mut rows = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| data_err(e.to_string()))?;
        let row = rec
            .iter()
            .map(|c| match c.trim().parse::<f64>() {
                Ok(v) if v.is_finite() => Ok(v),
                _ => Err(data_err(format!("non-numeric cell {c:?}"))),
            })
            .collect::<Result<Vec<_>, _>>()?;
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(data_err("no data rows".into()));
    }
    Ok((header, rows))
}
