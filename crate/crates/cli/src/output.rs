//! CSV and JSON rendering.

use serde::Serialize;
use serde_json::{json, Value};

use crate::config::{Format, RunConfig};

#[derive(Clone, Debug, PartialEq)]
pub enum Cell {
    Float(f64),
    Int(i64),
    Text(String),
    Empty,
}

impl From<f64> for Cell {
    fn from(v: f64) -> Self {
        Cell::Float(v)
    }
}

impl From<u32> for Cell {
    fn from(v: u32) -> Self {
        Cell::Int(v as i64)
    }
}

impl From<usize> for Cell {
    fn from(v: usize) -> Self {
        Cell::Int(v as i64)
    }
}

impl From<bool> for Cell {
    fn from(v: bool) -> Self {
        Cell::Text(v.to_string())
    }
}

impl From<String> for Cell {
    fn from(v: String) -> Self {
        Cell::Text(v)
    }
}

impl From<&str> for Cell {
    fn from(v: &str) -> Self {
        Cell::Text(v.to_string())
    }
}

impl<T: Into<Cell>> From<Option<T>> for Cell {
    fn from(v: Option<T>) -> Self {
        v.map(Into::into).unwrap_or(Cell::Empty)
    }
}

impl Cell {
    fn csv(&self) -> String {
        match self {
            Cell::Float(v) => format!("{v:.11e}"),
            Cell::Int(v) => v.to_string(),
            Cell::Text(s) if s.contains([',', '"', '\n']) => format!("\"{}\"", s.replace('"', "\"\"")),
            Cell::Text(s) => s.clone(),
            Cell::Empty => String::new(),
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct Table {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Cell>>,
}

impl Table {
    pub fn new(columns: &[&str]) -> Self {
        Table { columns: columns.iter().map(|c| c.to_string()).collect(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    pub fn column(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c == name)
    }
}

/// Result of one command: a flat table for CSV and a structured value for JSON.
#[derive(Clone, Debug)]
pub struct Output {
    pub command: &'static str,
    pub table: Table,
    pub result: Value,
    pub warnings: Vec<String>,
}

impl Output {
    pub fn new(command: &'static str, table: Table, result: impl Serialize) -> Self {
        let result = serde_json::to_value(result).unwrap_or(Value::Null);
        Output { command, table, result, warnings: Vec::new() }
    }

    pub fn render(&self, format: Format, config: &RunConfig) -> String {
        let config_json = serde_json::to_value(config).unwrap_or(Value::Null);
        match format {
            Format::Csv => {
                let mut s = format!("# dce {} {}\n", env!("CARGO_PKG_VERSION"), self.command);
                s.push_str(&format!("# config: {config_json}\n"));
                s.push_str(&self.table.columns.join(","));
                s.push('\n');
                for row in &self.table.rows {
                    let cells: Vec<String> = row.iter().map(Cell::csv).collect();
                    s.push_str(&cells.join(","));
                    s.push('\n');
                }
                s
            }
            Format::Json => {
                let env = json!({
                    "version": env!("CARGO_PKG_VERSION"),
                    "command": self.command,
                    "config": config_json,
                    "result": self.result,
                });
                let mut s = serde_json::to_string_pretty(&env).expect("serializable output");
                s.push('\n');
                s
            }
        }
    }
}
