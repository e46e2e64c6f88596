//! Experiment reports and their plot-ready tables.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::audits::AuditReport;
use crate::error::{Error, Result};
use crate::wigner::WignerGrid;

/// Output flavour for reports and tables.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, schemars::JsonSchema)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    #[default]
    Csv,
    Json,
}

impl std::str::FromStr for Format {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "csv" => Ok(Format::Csv),
            "json" => Ok(Format::Json),
            other => Err(Error::InvalidConfig(format!("unknown format {other:?}, expected csv or json"))),
        }
    }
}

/// Numeric table with named columns, stored row by row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Table {
    pub name: String,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl Table {
    pub fn new(name: &str, columns: &[&str]) -> Self {
        Self { name: name.into(), columns: columns.iter().map(|c| c.to_string()).collect(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<f64>) {
        assert_eq!(row.len(), self.columns.len(), "row width must match the header of {}", self.name);
        self.rows.push(row);
    }

    /// Values of one column.
    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let i = self.columns.iter().position(|c| c == name)?;
        Some(self.rows.iter().map(|r| r[i]).collect())
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path).map_err(csv_error)?;
        w.write_record(&self.columns).map_err(csv_error)?;
        for row in &self.rows {
            w.write_record(row.iter().map(|v| v.to_string())).map_err(csv_error)?;
        }
        w.flush()?;
        Ok(())
    }

    /// Columnar JSON: `{"name": .., "columns": {"q": [..], ..}}` with
    /// columns in header order.
    pub fn to_columnar(&self) -> Value {
        let mut cols = Map::new();
        for (i, c) in self.columns.iter().enumerate() {
            cols.insert(c.clone(), Value::from(self.rows.iter().map(|r| json_number(r[i])).collect::<Vec<_>>()));
        }
        let mut out = Map::new();
        out.insert("name".into(), Value::from(self.name.clone()));
        out.insert("columns".into(), Value::Object(cols));
        Value::Object(out)
    }

    pub fn write(&self, dir: &Path, format: Format) -> Result<PathBuf> {
        match format {
            Format::Csv => {
                let path = dir.join(format!("{}.csv", self.name));
                self.write_csv(&path)?;
                Ok(path)
            }
            Format::Json => {
                let path = dir.join(format!("{}.json", self.name));
                write_json(&path, &self.to_columnar())?;
                Ok(path)
            }
        }
    }
}

fn json_number(v: f64) -> Value {
    serde_json::Number::from_f64(v).map(Value::Number).unwrap_or_else(|| Value::String(v.to_string()))
}

fn csv_error(e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::Io(io),
        other => Error::Numerical(format!("csv writer: {other:?}")),
    }
}

pub(crate) fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}

/// Result of one experiment: prediction rows, free-form details and tables.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub experiment: String,
    pub rows: Vec<AuditReport>,
    pub details: Value,
    #[serde(skip)]
    pub tables: Vec<Table>,
    /// Wigner grids written in the binary layout as `<name>.bin`.
    #[serde(skip)]
    pub grids: Vec<(String, WignerGrid)>,
}

impl Report {
    pub fn new(experiment: &str) -> Self {
        Self { experiment: experiment.into(), rows: Vec::new(), details: Value::Object(Map::new()), tables: Vec::new(), grids: Vec::new() }
    }

    pub fn row(&mut self, row: AuditReport) {
        self.rows.push(row);
    }

    /// Stores `value` under `key` in the details object.
    pub fn detail<T: Serialize>(&mut self, key: &str, value: &T) -> Result<()> {
        let v = serde_json::to_value(value)?;
        if let Value::Object(map) = &mut self.details {
            map.insert(key.into(), v);
        }
        Ok(())
    }

    pub fn table(&self, name: &str) -> Option<&Table> {
        self.tables.iter().find(|t| t.name == name)
    }

    /// Every row within tolerance with its conditions satisfied.
    pub fn passed(&self) -> bool {
        self.rows.iter().all(AuditReport::passed)
    }

    pub fn failures(&self) -> Vec<&AuditReport> {
        self.rows.iter().filter(|r| !r.passed()).collect()
    }

    /// Writes the report and its tables into `dir` and returns the paths.
    ///
    /// CSV output gives `report.csv` (one line per prediction) next to
    /// `report.json`, which carries the full rows and details; JSON output
    /// gives `report.json` alone. Tables follow the chosen format.
    pub fn write(&self, dir: &Path, format: Format) -> Result<Vec<PathBuf>> {
        fs::create_dir_all(dir)?;
        let mut paths = Vec::new();
        let json_path = dir.join("report.json");
        write_json(&json_path, self)?;
        paths.push(json_path);
        if format == Format::Csv {
            let path = dir.join("report.csv");
            self.write_rows_csv(&path)?;
            paths.push(path);
        }
        for t in &self.tables {
            paths.push(t.write(dir, format)?);
        }
        for (name, grid) in &self.grids {
            let path = dir.join(format!("{name}.bin"));
            grid.write_binary(&path)?;
            paths.push(path);
        }
        Ok(paths)
    }

    fn write_rows_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path).map_err(csv_error)?;
        w.write_record(["quantity", "equation", "measured", "predicted", "tolerance", "tolerance_mode", "passed"]).map_err(csv_error)?;
        for r in &self.rows {
            let mode = serde_json::to_value(r.tolerance_mode)?;
            w.write_record([
                r.quantity.clone(),
                r.equation.clone(),
                r.measured.to_string(),
                r.predicted.to_string(),
                r.tolerance.to_string(),
                mode.as_str().unwrap_or_default().to_string(),
                r.passed().to_string(),
            ])
            .map_err(csv_error)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Machine-readable error document.
pub fn error_document(err: &Error) -> Value {
    serde_json::json!({ "error": { "kind": err.kind(), "message": err.to_string() } })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::audits::ToleranceMode;

    #[test]
    fn table_round_trip_and_columns() {
        let dir = tempfile::tempdir().unwrap();
        let mut t = Table::new("heat", &["q", "p", "W"]);
        t.push(vec![0.1, -0.2, 1.0 / 3.0]);
        t.push(vec![0.2, 0.3, 1e-300]);
        let path = t.write(dir.path(), Format::Csv).unwrap();
        let text = fs::read_to_string(path).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next(), Some("q,p,W"));
        let first: Vec<f64> = lines.next().unwrap().split(',').map(|v| v.parse().unwrap()).collect();
        assert_eq!(first, vec![0.1, -0.2, 1.0 / 3.0]);
        assert_eq!(t.column("p"), Some(vec![-0.2, 0.3]));
        let j = t.to_columnar();
        assert_eq!(j["columns"]["W"][1].as_f64(), Some(1e-300));
    }

    #[test]
    fn report_writes_are_byte_stable() {
        let mut r = Report::new("demo");
        r.row(AuditReport::new("x", "Eq. 0", 1.0, 1.0 + 1e-9, 1e-6, ToleranceMode::Absolute));
        r.detail("note", &"value").unwrap();
        let mut t = Table::new("curve", &["n", "y"]);
        t.push(vec![1.0, 0.5]);
        r.tables.push(t);
        for format in [Format::Csv, Format::Json] {
            let a = tempfile::tempdir().unwrap();
            let b = tempfile::tempdir().unwrap();
            let pa = r.write(a.path(), format).unwrap();
            let pb = r.write(b.path(), format).unwrap();
            assert_eq!(pa.len(), pb.len());
            for (x, y) in pa.iter().zip(&pb) {
                assert_eq!(fs::read(x).unwrap(), fs::read(y).unwrap());
            }
        }
        assert!(r.passed());
    }

    #[test]
    fn error_document_shape() {
        let e = Error::InvalidConfig("bad".into());
        let d = error_document(&e);
        assert_eq!(d["error"]["kind"], "invalid_config");
        assert!(d["error"]["message"].as_str().unwrap().contains("bad"));
    }
}
