//! CSV and text outputs of a run, and the manifest that indexes them.

use std::fs;
use std::path::{Path, PathBuf};

use serde_json::{json, Map, Value};
use sha2::{Digest, Sha256};

use crate::config::RunConfig;
use crate::error::CliError;

/// Fixed numeric format for every emitted float: 17 significant digits.
pub fn num(v: f64) -> String {
    format!("{v:.16e}")
}

#[derive(Debug)]
pub struct RunOutput {
    dir: PathBuf,
    files: Vec<(String, String)>,
}

impl RunOutput {
    pub fn create(dir: &Path) -> Result<Self, CliError> {
        fs::create_dir_all(dir).map_err(|e| CliError::Io {
            path: dir.to_path_buf(),
            source: e,
        })?;
        Ok(Self {
            dir: dir.to_path_buf(),
            files: Vec::new(),
        })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    fn write_bytes(&mut self, name: &str, bytes: &[u8]) -> Result<(), CliError> {
        let path = self.dir.join(name);
        fs::write(&path, bytes).map_err(|e| CliError::Io { path, source: e })?;
        let digest = format!("{:x}", Sha256::digest(bytes));
        self.files.retain(|(n, _)| n != name);
        self.files.push((name.to_string(), digest));
        Ok(())
    }

    pub fn write_csv(
        &mut self,
        name: &str,
        header: &[&str],
        rows: &[Vec<String>],
    ) -> Result<(), CliError> {
        let mut writer = csv::Writer::from_writer(Vec::new());
        writer.write_record(header)?;
        for row in rows {
            writer.write_record(row)?;
        }
        let bytes = writer
            .into_inner()
            .map_err(|e| CliError::Csv(e.into_error().into()))?;
        self.write_bytes(name, &bytes)
    }

    pub fn write_text(&mut self, name: &str, text: &str) -> Result<(), CliError> {
        self.write_bytes(name, text.as_bytes())
    }

    pub fn files(&self) -> &[(String, String)] {
        &self.files
    }
}

#[derive(Debug, Clone, Default)]
pub struct Outcome {
    pub summary: Map<String, Value>,
    pub pass: bool,
    pub reason: Option<String>,
}

impl Outcome {
    /// Records a failure; the first reason is kept.
    pub fn fail(&mut self, reason: impl Into<String>) {
        self.pass = false;
        if self.reason.is_none() {
            self.reason = Some(reason.into());
        }
    }
}

pub struct ManifestInput<'a> {
    pub command: &'a str,
    pub config: &'a RunConfig,
    pub started_at: String,
    pub finished_at: String,
    pub outcome: Option<&'a Outcome>,
    pub error: Option<String>,
    pub files: &'a [(String, String)],
}

pub fn manifest(input: ManifestInput<'_>) -> Value {
    let mut config = Map::new();
    for (k, v) in input.config.echo() {
        let entry = config.entry(k).or_insert_with(|| Value::Array(Vec::new()));
        if let Value::Array(values) = entry {
            values.push(Value::String(v));
        }
    }
    let files: Vec<Value> = input
        .files
        .iter()
        .map(|(name, sha)| json!({ "name": name, "sha256": sha }))
        .collect();
    let (pass, reason, summary) = match (input.outcome, &input.error) {
        (_, Some(err)) => (false, Some(err.clone()), Map::new()),
        (Some(o), None) => (o.pass, o.reason.clone(), o.summary.clone()),
        (None, None) => (false, None, Map::new()),
    };
    json!({
        "command": input.command,
        "version": env!("CARGO_PKG_VERSION"),
        "config": config,
        "started_at": input.started_at,
        "finished_at": input.finished_at,
        "summary": summary,
        "pass": pass,
        "reason": reason,
        "error": input.error,
        "files": files,
    })
}
