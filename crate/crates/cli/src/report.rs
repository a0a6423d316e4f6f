//! The JSON envelope carried by every artifact, CSV tables, and atomic
//! file output.

use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::config::RunConfig;
use crate::CliError;

pub const SCHEMA_VERSION: u32 = 1;
pub const TOOL: &str = "walsh-vp";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Status {
    /// Every verification the command performs passed.
    Pass,
    Fail,
    /// The command computes data and checks nothing.
    Info,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Throughput {
    pub unit: String,
    pub per_second: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Timing {
    pub wall_seconds: f64,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub throughput: Vec<Throughput>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportEnvelope {
    pub schema_version: u32,
    pub tool: String,
    pub tool_version: String,
    pub command: String,
    pub config: RunConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub timing: Option<Timing>,
    pub status: Status,
    /// CSV files written next to the JSON report.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub artifacts: Vec<String>,
    pub payload: Value,
}

impl ReportEnvelope {
    pub fn new(command: &str, config: &RunConfig, status: Status, payload: Value) -> Self {
        ReportEnvelope {
            schema_version: SCHEMA_VERSION,
            tool: TOOL.into(),
            tool_version: env!("CARGO_PKG_VERSION").into(),
            command: command.into(),
            config: config.clone(),
            timing: None,
            status,
            artifacts: Vec::new(),
            payload,
        }
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("envelope serializes");
        s.push('\n');
        s
    }

    /// One-line form for CSV comment headers, with the payload replaced by
    /// a pointer to the table.
    fn header_line(&self, table: &CsvTable) -> String {
        let mut head = self.clone();
        head.artifacts.clear();
        head.payload = serde_json::json!({ "table": table.name, "columns": table.columns });
        serde_json::to_string(&head).expect("envelope serializes")
    }
}

/// Plot-ready rows; cells are already formatted (exact strings or shortest
/// round-trip floats).
#[derive(Debug, Clone, PartialEq)]
pub struct CsvTable {
    pub name: String,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl CsvTable {
    pub fn new(name: &str, columns: &[&str]) -> Self {
        CsvTable {
            name: name.into(),
            columns: columns.iter().map(|c| c.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    /// `# <envelope>` on the first line, then the header and the rows.
    pub fn render(&self, envelope: &ReportEnvelope) -> Result<Vec<u8>, CliError> {
        let mut out = Vec::new();
        writeln!(out, "# {}", envelope.header_line(self)).map_err(io_err)?;
        let mut w = csv::Writer::from_writer(out);
        w.write_record(&self.columns).map_err(|e| CliError::Io(e.to_string()))?;
        for r in &self.rows {
            w.write_record(r).map_err(|e| CliError::Io(e.to_string()))?;
        }
        w.into_inner().map_err(|e| CliError::Io(e.to_string()))
    }
}

fn io_err(e: std::io::Error) -> CliError {
    CliError::Io(e.to_string())
}

/// Writes `bytes` to `path` through a temporary file in the same directory.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    let dir = path.parent().unwrap_or(Path::new("."));
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(io_err)?;
    tmp.write_all(bytes).map_err(io_err)?;
    tmp.as_file().sync_all().map_err(io_err)?;
    tmp.persist(path).map_err(|e| io_err(e.error))?;
    Ok(())
}

/// Writes `<stem>.json` and one `<stem>-<table>.csv` per table into `dir`.
pub fn write_artifacts(
    dir: &Path,
    stem: &str,
    envelope: &mut ReportEnvelope,
    tables: &[CsvTable],
) -> Result<Vec<PathBuf>, CliError> {
    std::fs::create_dir_all(dir).map_err(io_err)?;
    envelope.artifacts = tables.iter().map(|t| format!("{stem}-{}.csv", t.name)).collect();
    let mut written = Vec::new();
    for (t, name) in tables.iter().zip(&envelope.artifacts) {
        let path = dir.join(name);
        write_atomic(&path, &t.render(envelope)?)?;
        written.push(path);
    }
    let path = dir.join(format!("{stem}.json"));
    write_atomic(&path, envelope.to_json().as_bytes())?;
    written.push(path);
    Ok(written)
}

/// Shortest round-trip decimal, at most 17 significant digits.
pub fn float_text(v: f64) -> String {
    serde_json::to_string(&v).unwrap_or_else(|_| v.to_string())
}
