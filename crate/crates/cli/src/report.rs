//! Tabular results and their CSV / JSON rendering.

use std::io::{self, Write};

use serde_json::{json, Map, Value};

#[derive(Clone, Debug, PartialEq)]
pub enum Cell {
    Num(f64),
    Int(u64),
    Text(String),
    Bool(bool),
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

/// Fixed 17-significant-digit rendering, independent of locale.
pub fn format_f64(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.16e}")
    } else {
        v.to_string()
    }
}

impl Cell {
    fn text(&self) -> String {
        match self {
            Cell::Num(v) => format_f64(*v),
            Cell::Int(v) => v.to_string(),
            Cell::Text(s) => s.clone(),
            Cell::Bool(b) => b.to_string(),
        }
    }

    fn json(&self) -> Value {
        match self {
            Cell::Num(v) => serde_json::Number::from_f64(*v).map_or(Value::Null, Value::Number),
            Cell::Int(v) => json!(v),
            Cell::Text(s) => json!(s),
            Cell::Bool(b) => json!(b),
        }
    }
}

#[derive(Clone, Debug)]
pub struct Table {
    pub name: String,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Cell>>,
}

impl Table {
    pub fn new(name: &str, columns: &[&str]) -> Self {
        Self { name: name.into(), columns: columns.iter().map(|c| c.to_string()).collect(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    /// Two-column `quantity,value` table.
    pub fn summary(rows: Vec<(&str, Cell)>) -> Self {
        let mut t = Table::new("summary", &["quantity", "value"]);
        for (k, v) in rows {
            t.push(vec![k.into(), v]);
        }
        t
    }
}

#[derive(Clone, Debug)]
pub struct Meta {
    pub command: String,
    pub config_sha256: String,
    pub seed: Option<u64>,
    pub mode: String,
}

impl Meta {
    fn header(&self) -> String {
        let seed = self.seed.map_or("none".to_string(), |s| s.to_string());
        format!("# cpfsim {} config_sha256={} seed={} mode={}", self.command, self.config_sha256, seed, self.mode)
    }
}

#[derive(Clone, Debug)]
pub struct Report {
    pub meta: Meta,
    pub tables: Vec<Table>,
}

impl Report {
    pub fn write_csv<W: Write>(&self, w: &mut W) -> io::Result<()> {
        writeln!(w, "{}", self.meta.header())?;
        for (k, t) in self.tables.iter().enumerate() {
            if k > 0 {
                writeln!(w)?;
            }
            writeln!(w, "# table: {}", t.name)?;
            let mut wtr = csv::Writer::from_writer(&mut *w);
            wtr.write_record(&t.columns)?;
            for row in &t.rows {
                wtr.write_record(row.iter().map(Cell::text))?;
            }
            wtr.flush()?;
        }
        Ok(())
    }

    pub fn write_json<W: Write>(&self, w: &mut W) -> io::Result<()> {
        let mut tables = Map::new();
        for t in &self.tables {
            let rows: Vec<Value> = t.rows.iter().map(|r| Value::Array(r.iter().map(Cell::json).collect())).collect();
            tables.insert(t.name.clone(), json!({ "columns": t.columns, "rows": rows }));
        }
        let doc = json!({
            "meta": {
                "command": self.meta.command,
                "config_sha256": self.meta.config_sha256,
                "seed": self.meta.seed,
                "mode": self.meta.mode,
            },
            "tables": tables,
        });
        write_json_value(w, &doc)?;
        writeln!(w)
    }
}

struct SigDigits;

impl serde_json::ser::Formatter for SigDigits {
    fn write_f64<W: ?Sized + Write>(&mut self, w: &mut W, v: f64) -> io::Result<()> {
        w.write_all(format_f64(v).as_bytes())
    }
}

pub fn write_json_value<W: Write>(w: &mut W, v: &Value) -> io::Result<()> {
    let mut ser = serde_json::Serializer::with_formatter(w, SigDigits);
    serde::Serialize::serialize(v, &mut ser).map_err(io::Error::other)
}
