//! Tabular output with embedded run metadata.

use std::io::Write;

use serde_json::{json, Value};

use crate::config::Format;
use crate::error::CliError;

#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Num(f64),
    Int(u64),
    Text(String),
    Empty,
}

impl Cell {
    fn csv(&self) -> String {
        match self {
            Cell::Num(v) => fmt_f64(*v),
            Cell::Int(v) => v.to_string(),
            Cell::Text(s) => s.clone(),
            Cell::Empty => String::new(),
        }
    }

    fn json(&self) -> Value {
        match self {
            Cell::Num(v) if v.is_finite() => json!(v),
            Cell::Num(_) | Cell::Empty => Value::Null,
            Cell::Int(v) => json!(v),
            Cell::Text(s) => json!(s),
        }
    }
}

/// Shortest decimal that round-trips.
pub fn fmt_f64(v: f64) -> String {
    if v.is_finite() {
        serde_json::to_string(&v).expect("finite float")
    } else if v.is_nan() {
        "nan".into()
    } else if v > 0.0 {
        "inf".into()
    } else {
        "-inf".into()
    }
}

#[derive(Debug, Clone)]
pub struct Table {
    pub command: String,
    pub columns: Vec<(String, String)>,
    pub rows: Vec<Vec<Cell>>,
    pub notes: Vec<String>,
    pub seeds: Vec<String>,
    pub config_text: String,
}

impl Table {
    pub fn new(command: &str, config_text: &str) -> Self {
        Self {
            command: command.into(),
            columns: Vec::new(),
            rows: Vec::new(),
            notes: Vec::new(),
            seeds: Vec::new(),
            config_text: config_text.into(),
        }
    }

    pub fn column(&mut self, name: impl Into<String>, unit: impl Into<String>) {
        self.columns.push((name.into(), unit.into()));
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    pub fn write(&self, format: Format, out: &mut dyn Write) -> Result<(), CliError> {
        match format {
            Format::Csv => self.write_csv(out),
            Format::Json => self.write_json(out),
        }
    }

    fn write_csv(&self, out: &mut dyn Write) -> Result<(), CliError> {
        writeln!(out, "# superres {} {}", env!("CARGO_PKG_VERSION"), self.command)?;
        let units: Vec<String> = self.columns.iter().map(|(c, u)| format!("{c}={u}")).collect();
        writeln!(out, "# units: {}", units.join(", "))?;
        for s in &self.seeds {
            writeln!(out, "# seeds: {s}")?;
        }
        for n in &self.notes {
            writeln!(out, "# note: {n}")?;
        }
        writeln!(out, "# config:")?;
        for line in self.config_text.lines() {
            writeln!(out, "#   {line}")?;
        }
        let mut w = csv::Writer::from_writer(out);
        w.write_record(self.columns.iter().map(|(c, _)| c.as_str())).map_err(csv_err)?;
        for row in &self.rows {
            w.write_record(row.iter().map(Cell::csv)).map_err(csv_err)?;
        }
        w.flush()?;
        Ok(())
    }

    fn write_json(&self, out: &mut dyn Write) -> Result<(), CliError> {
        let doc = json!({
            "tool": "superres",
            "version": env!("CARGO_PKG_VERSION"),
            "command": self.command,
            "units": self.columns.iter().map(|(c, u)| json!({"column": c, "unit": u})).collect::<Vec<_>>(),
            "seeds": self.seeds,
            "notes": self.notes,
            "config": self.config_text,
            "columns": self.columns.iter().map(|(c, _)| c.clone()).collect::<Vec<_>>(),
            "rows": self.rows.iter().map(|r| r.iter().map(Cell::json).collect::<Vec<_>>()).collect::<Vec<_>>(),
        });
        serde_json::to_writer_pretty(&mut *out, &doc).map_err(|e| CliError::Io(e.into()))?;
        writeln!(out)?;
        Ok(())
    }
}

fn csv_err(e: csv::Error) -> CliError {
    CliError::Io(e.into())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn floats_round_trip() {
        for v in [0.1, 1.0 / 3.0, 1e-300, 6.02214076e23, -2.5, 0.0] {
            assert_eq!(fmt_f64(v).parse::<f64>().unwrap(), v);
        }
        assert_eq!(fmt_f64(0.1), "0.1");
    }
}
