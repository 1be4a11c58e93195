//! Result serialization: CSV with a commented preamble, plus a JSON
//! mirror carrying the same rows and the run metadata.
//!
//! The CSV stream is fully deterministic — wall-clock time lives only in
//! the JSON metadata — so identical invocations produce byte-identical
//! CSV files.

use std::fmt::Write as _;
use std::path::Path;

use serde::Serialize;
use serde_json::{json, Map, Value};

use crate::CliError;

/// Output format selector.
#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Format {
    /// Comma-separated rows with a `#`-commented preamble (and a JSON
    /// mirror next to the file when writing to disk).
    Csv,
    /// Structured JSON only.
    Json,
}

/// One command's finished output: preamble comments, a header, data rows,
/// and the structured payload mirroring them.
pub struct Report {
    pub command: &'static str,
    /// `key = value` lines echoed as comments atop the CSV.
    pub preamble: Vec<(String, String)>,
    pub header: &'static str,
    pub rows: Vec<String>,
    /// Command-specific JSON body; `metadata` is attached at emit time.
    pub payload: Value,
}

impl Report {
    pub fn csv(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "# ampalloc {}", self.command);
        for (key, value) in &self.preamble {
            let _ = writeln!(out, "# {key} = {value}");
        }
        let _ = writeln!(out, "{}", self.header);
        for row in &self.rows {
            let _ = writeln!(out, "{row}");
        }
        out
    }

    pub fn json(&self, config: &Value, wall_time_seconds: f64) -> Value {
        let mut value = self.payload.clone();
        value["metadata"] = json!({
            "command": self.command,
            "version": env!("CARGO_PKG_VERSION"),
            "config": config,
            "wall_time_seconds": wall_time_seconds,
        });
        value
    }
}

/// Renders a serialized config as preamble `key = value` pairs, in the
/// (deterministic) field order of its JSON form.
pub fn config_preamble(config: &Value) -> Vec<(String, String)> {
    let mut pairs = Vec::new();
    if let Value::Object(map) = config {
        for (key, value) in map {
            pairs.push((key.clone(), scalar(value)));
        }
    }
    pairs
}

/// Renders any config struct to a JSON value (object field order becomes
/// the preamble order).
pub fn config_value(config: &impl Serialize) -> Value {
    serde_json::to_value(config).expect("config structs always serialize")
}

/// Adds one extra field to a config echo (for command-specific lists such
/// as sweep abscissae).
pub fn with_field(mut config: Value, key: &str, value: Value) -> Value {
    if let Value::Object(ref mut map) = config {
        map.insert(key.to_string(), value);
    } else {
        let mut map = Map::new();
        map.insert(key.to_string(), value);
        config = Value::Object(map);
    }
    config
}

fn scalar(value: &Value) -> String {
    match value {
        Value::String(s) => s.clone(),
        other => other.to_string(),
    }
}

/// `Display`-formats a float for a CSV cell (shortest round-trip form).
pub fn cell(x: f64) -> String {
    format!("{x}")
}

/// Formats an optional float, with a fixed marker for the `None` case.
pub fn cell_or(x: Option<f64>, marker: &str) -> String {
    x.map(cell).unwrap_or_else(|| marker.to_string())
}

/// Writes the report to its destination(s).
///
/// CSV to a file also writes a JSON mirror next to it (same stem, `.json`
/// extension); JSON format writes only the JSON. Without an output path
/// the chosen format goes to stdout. A file that fails mid-write is
/// removed rather than left truncated.
pub fn emit(
    report: &Report,
    config: &Value,
    format: Format,
    output: Option<&Path>,
    wall_time_seconds: f64,
) -> Result<(), CliError> {
    let json_value = report.json(config, wall_time_seconds);
    let mut json_text =
        serde_json::to_string_pretty(&json_value).map_err(|e| CliError::Runtime(e.to_string()))?;
    json_text.push('\n');

    match (format, output) {
        (Format::Csv, Some(path)) => {
            write_file(path, &report.csv())?;
            let mirror = path.with_extension("json");
            if mirror != path {
                write_file(&mirror, &json_text)?;
            }
        }
        (Format::Json, Some(path)) => write_file(path, &json_text)?,
        (Format::Csv, None) => print!("{}", report.csv()),
        (Format::Json, None) => print!("{json_text}"),
    }
    Ok(())
}

fn write_file(path: &Path, contents: &str) -> Result<(), CliError> {
    std::fs::write(path, contents).map_err(|e| {
        // Never leave a truncated file behind.
        let _ = std::fs::remove_file(path);
        CliError::Runtime(format!("cannot write {}: {e}", path.display()))
    })
}
