//! Run reports and their JSON, CSV and markdown renderings.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use serde_json::Value;

/// A scalar result with the method that produced it and an error bound, if one is known.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Scalar {
    pub value: f64,
    pub method: String,
    pub error_bound: Option<f64>,
}

impl Scalar {
    pub fn new(value: f64, method: impl Into<String>, error_bound: Option<f64>) -> Self {
        Scalar { value, method: method.into(), error_bound: error_bound.filter(|b| b.is_finite()) }
    }
}

/// One pass/fail check. Diagnostics use the same shape but do not gate the exit code.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Criterion {
    pub id: String,
    pub description: String,
    pub passed: bool,
    pub measured: String,
}

impl Criterion {
    pub fn new(id: &str, description: impl Into<String>, passed: bool, measured: impl Into<String>) -> Self {
        Criterion { id: id.into(), description: description.into(), passed, measured: measured.into() }
    }
}

/// Results table whose last two columns are always `method` and `error_bound`.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Table {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Value>>,
}

impl Table {
    pub fn new(columns: &[&str]) -> Self {
        let mut columns: Vec<String> = columns.iter().map(|c| c.to_string()).collect();
        columns.push("method".into());
        columns.push("error_bound".into());
        Table { columns, rows: Vec::new() }
    }

    pub fn push(&mut self, values: Vec<Value>, method: &str, error_bound: Option<f64>) {
        assert_eq!(values.len() + 2, self.columns.len(), "row width");
        let mut row = values;
        row.push(Value::String(method.into()));
        row.push(error_bound.map_or(Value::Null, num));
        self.rows.push(row);
    }
}

/// A finite float as JSON; non-finite values become `null`.
pub fn num(x: f64) -> Value {
    serde_json::Number::from_f64(x).map_or(Value::Null, Value::Number)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub experiment: String,
    pub inputs: Value,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Value>>,
    pub summary: BTreeMap<String, Scalar>,
    pub criteria: Vec<Criterion>,
    pub diagnostics: Vec<Criterion>,
    pub versions: BTreeMap<String, String>,
    pub wall_time_s: f64,
}

impl Report {
    /// Whether every gating criterion passed.
    pub fn passed(&self) -> bool {
        self.criteria.iter().all(|c| c.passed)
    }

    pub fn from_json(bytes: &[u8]) -> serde_json::Result<Report> {
        serde_json::from_slice(bytes)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Json,
    Csv,
    Markdown,
}

pub fn render(report: &Report, format: Format) -> Vec<u8> {
    match format {
        Format::Json => {
            let mut out = serde_json::to_vec_pretty(report).expect("report serializes");
            out.push(b'\n');
            out
        }
        Format::Csv => render_csv(report),
        Format::Markdown => render_markdown(report).into_bytes(),
    }
}

fn cell(v: &Value) -> String {
    match v {
        Value::Null => String::new(),
        Value::String(s) => s.clone(),
        other => other.to_string(),
    }
}

fn render_csv(report: &Report) -> Vec<u8> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(&report.columns).expect("write to memory");
    for row in &report.rows {
        w.write_record(row.iter().map(cell)).expect("write to memory");
    }
    w.into_inner().expect("flush to memory")
}

fn md_escape(s: &str) -> String {
    s.replace('|', "\\|").replace('\n', " ")
}

fn render_markdown(report: &Report) -> String {
    let mut s = format!("# {}\n\n", report.experiment);
    if !report.columns.is_empty() {
        s += &format!("| {} |\n", report.columns.iter().map(|c| md_escape(c)).collect::<Vec<_>>().join(" | "));
        s += &format!("|{}\n", " --- |".repeat(report.columns.len()));
        for row in &report.rows {
            s += &format!("| {} |\n", row.iter().map(|v| md_escape(&cell(v))).collect::<Vec<_>>().join(" | "));
        }
        s.push('\n');
    }
    if !report.summary.is_empty() {
        s += "## Summary values\n\n";
        for (k, v) in &report.summary {
            let bound = v.error_bound.map_or("no bound".to_string(), |b| format!("± {b:e}"));
            s += &format!("- {}: {} ({bound}; {})\n", md_escape(k), v.value, md_escape(&v.method));
        }
        s.push('\n');
    }
    let line = |c: &Criterion| format!("- {} `{}`: {} (measured: {})\n", if c.passed { "PASS" } else { "FAIL" }, c.id, md_escape(&c.description), md_escape(&c.measured));
    s += "## Criteria\n\n";
    for c in &report.criteria {
        s += &line(c);
    }
    if !report.diagnostics.is_empty() {
        s += "\n## Diagnostics (not gating)\n\n";
        for c in &report.diagnostics {
            s += &line(c);
        }
    }
    let passed = report.criteria.iter().filter(|c| c.passed).count();
    s += &format!(
        "\n**{}**: {passed} of {} criteria passed in {:.2} s\n",
        if report.passed() { "PASS" } else { "FAIL" },
        report.criteria.len(),
        report.wall_time_s
    );
    s
}
