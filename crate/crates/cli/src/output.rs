//! Output files, tabular interchange and the run manifest.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::ValueEnum;
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};
use sha2::{Digest, Sha256};

use crate::error::{usage, CliError, CliResult};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    #[default]
    Csv,
    Json,
}

/// Numeric table with named columns.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Table {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl Table {
    pub fn new(columns: &[&str]) -> Self {
        Self { columns: columns.iter().map(|c| c.to_string()).collect(), rows: vec![] }
    }

    pub fn push(&mut self, row: Vec<f64>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let i = self.columns.iter().position(|c| c == name)?;
        Some(self.rows.iter().map(|r| r[i]).collect())
    }

    pub fn require(&self, name: &str, source: &Path) -> CliResult<Vec<f64>> {
        self.column(name).ok_or_else(|| {
            usage(format!(
                "{} has no `{name}` column (found: {})",
                source.display(),
                self.columns.join(", ")
            ))
        })
    }

    /// Shortest round-trip decimal for every value.
    pub fn to_csv(&self) -> String {
        let mut out = self.columns.join(",");
        out.push('\n');
        for row in &self.rows {
            for (i, v) in row.iter().enumerate() {
                if i > 0 {
                    out.push(',');
                }
                let _ = write!(out, "{v}");
            }
            out.push('\n');
        }
        out
    }

    /// Array of row objects; non-finite values become `null`.
    pub fn to_json(&self) -> String {
        let rows: Vec<Value> = self
            .rows
            .iter()
            .map(|row| {
                let obj: Map<String, Value> = self
                    .columns
                    .iter()
                    .zip(row)
                    .map(|(c, &v)| (c.clone(), serde_json::Number::from_f64(v).map_or(Value::Null, Value::Number)))
                    .collect();
                Value::Object(obj)
            })
            .collect();
        let mut text = serde_json::to_string_pretty(&rows).expect("plain values serialize");
        text.push('\n');
        text
    }

    fn from_csv(text: &str, source: &Path) -> CliResult<Self> {
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        let header = lines.next().ok_or_else(|| usage(format!("{} is empty", source.display())))?;
        let columns: Vec<String> = header.split(',').map(|c| c.trim().to_string()).collect();
        let mut table = Table { columns, rows: vec![] };
        for (i, line) in lines.enumerate() {
            let row = line
                .split(',')
                .map(|v| v.trim().parse::<f64>())
                .collect::<Result<Vec<f64>, _>>()
                .map_err(|e| usage(format!("{} line {}: {e}", source.display(), i + 2)))?;
            if row.len() != table.columns.len() {
                return Err(usage(format!(
                    "{} line {}: {} values for {} columns",
                    source.display(),
                    i + 2,
                    row.len(),
                    table.columns.len()
                )));
            }
            table.rows.push(row);
        }
        Ok(table)
    }

    fn from_json(text: &str, source: &Path) -> CliResult<Self> {
        let rows: Vec<Map<String, Value>> =
            serde_json::from_str(text).map_err(|e| usage(format!("{}: {e}", source.display())))?;
        let columns: Vec<String> = rows.first().map(|r| r.keys().cloned().collect()).unwrap_or_default();
        let mut table = Table { columns, rows: vec![] };
        for (i, r) in rows.iter().enumerate() {
            let row = table
                .columns
                .iter()
                .map(|c| r.get(c).and_then(Value::as_f64))
                .collect::<Option<Vec<f64>>>()
                .ok_or_else(|| usage(format!("{} row {i}: missing or non-numeric value", source.display())))?;
            table.rows.push(row);
        }
        Ok(table)
    }

    /// Reads a table written by this tool: JSON if the extension is `.json`,
    /// CSV otherwise.
    pub fn read(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Io(format!("cannot read {}: {e}", path.display())))?;
        if path.extension().is_some_and(|e| e == "json") {
            Self::from_json(&text, path)
        } else {
            Self::from_csv(&text, path)
        }
    }
}

#[derive(Serialize)]
struct OutputFile {
    file: String,
    sha256: String,
}

#[derive(Serialize)]
struct Manifest<'a> {
    toolkit: &'static str,
    version: &'static str,
    command: &'a str,
    config: &'a Value,
    wall_clock_seconds: f64,
    outputs: &'a [OutputFile],
}

/// Collects the files of one run and writes `manifest.json` at the end.
pub struct Output {
    dir: PathBuf,
    format: Format,
    files: Vec<OutputFile>,
    started: Instant,
}

impl Output {
    pub fn new(dir: &Path, format: Format) -> CliResult<Self> {
        std::fs::create_dir_all(dir)
            .map_err(|e| CliError::Io(format!("cannot create {}: {e}", dir.display())))?;
        Ok(Self { dir: dir.to_path_buf(), format, files: vec![], started: Instant::now() })
    }

    pub fn write(&mut self, name: &str, bytes: &[u8]) -> CliResult<()> {
        let path = self.dir.join(name);
        std::fs::write(&path, bytes).map_err(|e| CliError::Io(format!("cannot write {}: {e}", path.display())))?;
        self.files.push(OutputFile { file: name.to_string(), sha256: hex::encode(Sha256::digest(bytes)) });
        Ok(())
    }

    /// Writes `<stem>.csv` or `<stem>.json` according to `--format`.
    pub fn table(&mut self, stem: &str, table: &Table) -> CliResult<String> {
        let (name, text) = match self.format {
            Format::Csv => (format!("{stem}.csv"), table.to_csv()),
            Format::Json => (format!("{stem}.json"), table.to_json()),
        };
        self.write(&name, text.as_bytes())?;
        Ok(name)
    }

    pub fn json<T: Serialize + ?Sized>(&mut self, name: &str, value: &T) -> CliResult<()> {
        let mut text = serde_json::to_string_pretty(value)?;
        text.push('\n');
        self.write(name, text.as_bytes())
    }

    pub fn finish(self, command: &str, config: &Value) -> CliResult<()> {
        let manifest = Manifest {
            toolkit: "ionqho",
            version: env!("CARGO_PKG_VERSION"),
            command,
            config,
            wall_clock_seconds: self.started.elapsed().as_secs_f64(),
            outputs: &self.files,
        };
        let mut text = serde_json::to_string_pretty(&manifest)?;
        text.push('\n');
        let path = self.dir.join("manifest.json");
        std::fs::write(&path, text).map_err(|e| CliError::Io(format!("cannot write {}: {e}", path.display())))?;
        for f in &self.files {
            eprintln!("wrote {}", self.dir.join(&f.file).display());
        }
        Ok(())
    }
}
