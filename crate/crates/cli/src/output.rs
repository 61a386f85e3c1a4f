//! Artifact tables and their delimited / structured text encodings.
//!
//! Floats are written in Rust's shortest round-trip form, so identical
//! results give identical bytes.

use std::fs;
use std::path::{Path, PathBuf};

use crate::config::{ExperimentConfig, Format};
use crate::CliError;

#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Int(i64),
    Float(f64),
    Text(String),
    Bool(bool),
    Empty,
}

impl Cell {
    fn csv_text(&self) -> String {
        match self {
            Cell::Int(v) => v.to_string(),
            Cell::Float(v) => format_float(*v),
            Cell::Text(s) => s.clone(),
            Cell::Bool(b) => b.to_string(),
            Cell::Empty => String::new(),
        }
    }

    fn toml_value(&self) -> Option<toml::Value> {
        match self {
            Cell::Int(v) => Some(toml::Value::Integer(*v)),
            Cell::Float(v) => Some(toml::Value::Float(*v)),
            Cell::Text(s) => Some(toml::Value::String(s.clone())),
            Cell::Bool(b) => Some(toml::Value::Boolean(*b)),
            Cell::Empty => None,
        }
    }
}

/// Shortest round-trip text; exponent form outside `[1e-4, 1e15)`.
pub fn format_float(v: f64) -> String {
    let a = v.abs();
    if a == 0.0 || (1e-4..1e15).contains(&a) || !a.is_finite() {
        v.to_string()
    } else {
        format!("{v:e}")
    }
}

impl From<f64> for Cell {
    fn from(v: f64) -> Self {
        Cell::Float(v)
    }
}

impl From<usize> for Cell {
    fn from(v: usize) -> Self {
        Cell::Int(v as i64)
    }
}

impl From<u32> for Cell {
    fn from(v: u32) -> Self {
        Cell::Int(v as i64)
    }
}

impl From<bool> for Cell {
    fn from(v: bool) -> Self {
        Cell::Bool(v)
    }
}

impl From<&str> for Cell {
    fn from(v: &str) -> Self {
        Cell::Text(v.to_string())
    }
}

impl From<String> for Cell {
    fn from(v: String) -> Self {
        Cell::Text(v)
    }
}

impl From<Option<f64>> for Cell {
    fn from(v: Option<f64>) -> Self {
        v.map_or(Cell::Empty, Cell::Float)
    }
}

/// Result of one pipeline: a table plus scalar summary entries.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Artifact {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Cell>>,
    pub summary: Vec<(String, toml::Value)>,
    /// Set when some rows carry a per-point failure.
    pub partial: bool,
}

impl Artifact {
    pub fn new(columns: &[&str]) -> Self {
        Self { columns: columns.iter().map(|c| c.to_string()).collect(), ..Self::default() }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    pub fn note(&mut self, key: &str, value: impl Into<toml::Value>) {
        self.summary.push((key.to_string(), value.into()));
    }

    pub fn column(&self, name: &str) -> Option<Vec<&Cell>> {
        let j = self.columns.iter().position(|c| c == name)?;
        Some(self.rows.iter().map(|r| &r[j]).collect())
    }

    pub fn summary_value(&self, key: &str) -> Option<&toml::Value> {
        self.summary.iter().find(|(k, _)| k == key).map(|(_, v)| v)
    }
}

fn header(config: &ExperimentConfig) -> String {
    let mut out = format!("# hadamard-lab {}\n# pipeline: {}\n# config:\n", hadamard_lab::VERSION, config.pipeline.name());
    for line in config.to_toml().lines() {
        out.push_str("#   ");
        out.push_str(line);
        out.push('\n');
    }
    out
}

pub fn encode_csv(config: &ExperimentConfig, artifact: &Artifact) -> Result<String, CliError> {
    let mut out = header(config);
    for (k, v) in &artifact.summary {
        out.push_str(&format!("# summary.{k} = {v}\n"));
    }
    if artifact.partial {
        out.push_str("# partial = true\n");
    }
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(&artifact.columns).map_err(|e| CliError::Io(e.to_string()))?;
    for row in &artifact.rows {
        w.write_record(row.iter().map(Cell::csv_text)).map_err(|e| CliError::Io(e.to_string()))?;
    }
    let body = w.into_inner().map_err(|e| CliError::Io(e.to_string()))?;
    out.push_str(&String::from_utf8(body).expect("csv output is utf-8"));
    Ok(out)
}

pub fn encode_toml(config: &ExperimentConfig, artifact: &Artifact) -> Result<String, CliError> {
    let mut doc = toml::Table::new();
    doc.insert("version".into(), hadamard_lab::VERSION.into());
    doc.insert("pipeline".into(), config.pipeline.name().into());
    doc.insert("partial".into(), artifact.partial.into());
    let cfg = toml::Value::try_from(config).map_err(|e| CliError::Io(e.to_string()))?;
    doc.insert("config".into(), cfg);
    let summary: toml::Table = artifact.summary.iter().cloned().collect();
    doc.insert("summary".into(), summary.into());
    let rows: Vec<toml::Value> = artifact
        .rows
        .iter()
        .map(|r| {
            let t: toml::Table = artifact
                .columns
                .iter()
                .zip(r)
                .filter_map(|(c, v)| v.toml_value().map(|v| (c.clone(), v)))
                .collect();
            toml::Value::Table(t)
        })
        .collect();
    doc.insert("rows".into(), rows.into());
    toml::to_string(&doc).map_err(|e| CliError::Io(e.to_string()))
}

/// Writes the artifact under the configured directory; returns the path.
pub fn write_artifact(config: &ExperimentConfig, artifact: &Artifact) -> Result<PathBuf, CliError> {
    let (text, ext) = match config.output.format {
        Format::Csv => (encode_csv(config, artifact)?, "csv"),
        Format::Toml => (encode_toml(config, artifact)?, "toml"),
    };
    let stem = config.output.stem.clone().unwrap_or_else(|| config.pipeline.name().to_string());
    let dir: &Path = &config.output.dir;
    fs::create_dir_all(dir).map_err(|e| CliError::Io(format!("{}: {e}", dir.display())))?;
    let path = dir.join(format!("{stem}.{ext}"));
    fs::write(&path, text).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    Ok(path)
}
