//! Machine-readable output records.

use std::io::Write;

use serde_json::{json, Map, Value};

pub const SCHEMA_VERSION: &str = "1";

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Format {
    Json,
    Csv,
}

/// Everything a command reports: resolved parameters, optional scalar
/// summary, and one result table.
#[derive(Debug, Default)]
pub struct Record {
    pub command: String,
    pub params: Map<String, Value>,
    pub seed: Option<u64>,
    pub reps: Option<u64>,
    pub summary: Map<String, Value>,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Value>>,
    pub error: Option<(String, String)>,
}

impl Record {
    pub fn new(command: &str) -> Self {
        Record { command: command.to_string(), ..Default::default() }
    }

    pub fn param(&mut self, key: &str, value: impl Into<Value>) {
        self.params.insert(key.to_string(), value.into());
    }

    pub fn summary(&mut self, key: &str, value: impl Into<Value>) {
        self.summary.insert(key.to_string(), value.into());
    }

    pub fn columns(&mut self, cols: &[&str]) {
        self.columns = cols.iter().map(|c| c.to_string()).collect();
    }

    pub fn row(&mut self, row: Vec<Value>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    pub fn to_json(&self) -> Value {
        let mut obj = Map::new();
        obj.insert("schema_version".into(), SCHEMA_VERSION.into());
        obj.insert("command".into(), self.command.clone().into());
        obj.insert("params".into(), Value::Object(self.params.clone()));
        if let Some(seed) = self.seed {
            obj.insert("seed".into(), seed.into());
        }
        if let Some(reps) = self.reps {
            obj.insert("reps".into(), reps.into());
        }
        if let Some((name, message)) = &self.error {
            obj.insert("error".into(), json!({ "name": name, "message": message }));
            return Value::Object(obj);
        }
        if !self.summary.is_empty() {
            obj.insert("summary".into(), Value::Object(self.summary.clone()));
        }
        obj.insert("results".into(), json!({ "columns": self.columns, "rows": self.rows }));
        Value::Object(obj)
    }

    pub fn write(&self, format: Format, out: &mut impl Write) -> std::io::Result<()> {
        match format {
            Format::Json => {
                serde_json::to_writer_pretty(&mut *out, &self.to_json())?;
                writeln!(out)
            }
            Format::Csv => self.write_csv(out),
        }
    }

    fn write_csv(&self, out: &mut impl Write) -> std::io::Result<()> {
        writeln!(out, "# schema_version={SCHEMA_VERSION}")?;
        writeln!(out, "# command={}", self.command)?;
        for (k, v) in &self.params {
            writeln!(out, "# param.{k}={}", cell(v))?;
        }
        if let Some(seed) = self.seed {
            writeln!(out, "# seed={seed}")?;
        }
        if let Some(reps) = self.reps {
            writeln!(out, "# reps={reps}")?;
        }
        if self.error.is_none() {
            for (k, v) in &self.summary {
                writeln!(out, "# summary.{k}={}", cell(v))?;
            }
        }
        let mut w = csv::Writer::from_writer(&mut *out);
        if let Some((name, message)) = &self.error {
            w.write_record(["error", "message"])?;
            w.write_record([name, message])?;
            return w.flush();
        }
        w.write_record(&self.columns)?;
        for row in &self.rows {
            w.write_record(row.iter().map(cell))?;
        }
        w.flush()
    }
}

fn cell(v: &Value) -> String {
    match v {
        Value::Null => String::new(),
        Value::String(s) => s.clone(),
        other => other.to_string(),
    }
}

/// Shortest round-trip representation; non-finite values become strings.
pub fn num(x: f64) -> Value {
    match serde_json::Number::from_f64(x) {
        Some(n) => Value::Number(n),
        None if x.is_nan() => "NaN".into(),
        None if x > 0.0 => "inf".into(),
        None => "-inf".into(),
    }
}

pub fn rational(num: u128, den: u128) -> String {
    let g = gcd(num, den);
    format!("{}/{}", num / g, den / g)
}

fn gcd(mut a: u128, mut b: u128) -> u128 {
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a.max(1)
}
