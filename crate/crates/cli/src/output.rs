//! Result tables and their CSV / JSON serialization.

use std::io::Write;

use serde_json::{json, Value};

use crate::config::{ExperimentConfig, Format};
use crate::CliError;

#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Num(f64),
    Int(u64),
    Text(String),
    Bool(bool),
    Empty,
}

impl From<f64> for Cell {
    fn from(v: f64) -> Self {
        Cell::Num(v)
    }
}
impl From<u64> for Cell {
    fn from(v: u64) -> Self {
        Cell::Int(v)
    }
}
impl From<usize> for Cell {
    fn from(v: usize) -> Self {
        Cell::Int(v as u64)
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
        v.map_or(Cell::Empty, Cell::Num)
    }
}

/// Nine significant digits; fixed notation for moderate magnitudes,
/// scientific otherwise; `inf`, `-inf` and `nan` as tokens.
pub fn format_number(x: f64) -> String {
    if x.is_nan() {
        return "nan".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if x == 0.0 {
        return "0".into();
    }
    let sci = format!("{x:.8e}");
    let exp: i32 = sci.split_once('e').and_then(|(_, e)| e.parse().ok()).unwrap_or(0);
    if (-5..9).contains(&exp) {
        format!("{:.*}", (8 - exp) as usize, x)
    } else {
        sci
    }
}

/// Semicolon-joined vector, for profile columns.
pub fn join(v: &[f64]) -> String {
    v.iter().map(|x| format_number(*x)).collect::<Vec<_>>().join(";")
}

impl Cell {
    fn text(&self) -> String {
        match self {
            Cell::Num(v) => format_number(*v),
            Cell::Int(v) => v.to_string(),
            Cell::Text(s) => s.clone(),
            Cell::Bool(b) => b.to_string(),
            Cell::Empty => String::new(),
        }
    }

    fn json(&self) -> Value {
        match self {
            Cell::Num(v) if v.is_finite() => json!(v),
            Cell::Num(v) => json!(format_number(*v)),
            Cell::Int(v) => json!(v),
            Cell::Text(s) => json!(s),
            Cell::Bool(b) => json!(b),
            Cell::Empty => Value::Null,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Report {
    pub columns: Vec<&'static str>,
    pub rows: Vec<Vec<Cell>>,
}

impl Report {
    pub fn new(columns: Vec<&'static str>) -> Self {
        Report { columns, rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }
}

pub fn write_report<W: Write>(mut w: W, cfg: &ExperimentConfig, report: &Report) -> Result<(), CliError> {
    match cfg.output.format {
        Format::Csv => {
            writeln!(w, "# config_hash: {}", cfg.hash())?;
            writeln!(w, "# seed: {}", cfg.seed)?;
            writeln!(w, "# config: {}", cfg.canonical())?;
            let mut out = csv::Writer::from_writer(w);
            out.write_record(&report.columns).map_err(csv_error)?;
            for row in &report.rows {
                out.write_record(row.iter().map(Cell::text)).map_err(csv_error)?;
            }
            out.flush()?;
        }
        Format::Json => {
            let config: Value = serde_json::from_str(&cfg.canonical()).expect("canonical config is JSON");
            let doc = json!({
                "config_hash": cfg.hash(),
                "seed": cfg.seed,
                "config": config,
                "columns": report.columns,
                "rows": report.rows.iter().map(|r| r.iter().map(Cell::json).collect::<Vec<_>>()).collect::<Vec<_>>(),
            });
            serde_json::to_writer_pretty(&mut w, &doc).map_err(|e| CliError::Io(e.to_string()))?;
            writeln!(w)?;
        }
    }
    Ok(())
}

fn csv_error(e: csv::Error) -> CliError {
    CliError::Io(e.to_string())
}

/// Re-parses the config embedded in a result file and checks it against the
/// embedded hash. Returns the hash.
pub fn verify(text: &str) -> Result<String, CliError> {
    let (hash, config) = if text.trim_start().starts_with('{') {
        let doc: Value = serde_json::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
        let hash = doc["config_hash"].as_str().map(str::to_string);
        let config = doc.get("config").map(Value::to_string);
        (hash, config)
    } else {
        let meta = |key: &str| text.lines().find_map(|l| l.strip_prefix(key)).map(|v| v.trim().to_string());
        (meta("# config_hash:"), meta("# config:"))
    };
    let (Some(hash), Some(config)) = (hash, config) else {
        return Err(CliError::Config("result file has no embedded config".into()));
    };
    let cfg = ExperimentConfig::from_canonical(&config)?;
    if cfg.hash() != hash {
        return Err(CliError::Config(format!("embedded hash {hash} does not match config hash {}", cfg.hash())));
    }
    Ok(hash)
}
