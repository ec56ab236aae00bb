//! Result tables and files. The CSV holds only deterministic quantities so that
//! identical inputs give byte-identical files; wall-clock timing goes to the JSON summary.

use serde::Serialize;
use std::collections::BTreeMap;
use std::path::Path;

use crate::error::Result;

pub const SCHEMA_LINE: &str = "# schema=1";
pub const STATUS_OK: &str = "ok";

/// One CSV row keyed by column name; absent columns are written empty.
#[derive(Debug, Clone, Default)]
pub struct Row(BTreeMap<String, String>);

impl Row {
    pub fn new() -> Self {
        Self::default()
    }

    /// Shortest round-trip representation, switching to exponent form for tiny or huge values.
    pub fn num(mut self, column: &str, value: f64) -> Self {
        self.0.insert(column.to_string(), format!("{value:?}"));
        self
    }

    pub fn int(mut self, column: &str, value: usize) -> Self {
        self.0.insert(column.to_string(), value.to_string());
        self
    }

    pub fn text(mut self, column: &str, value: impl Into<String>) -> Self {
        self.0.insert(column.to_string(), value.into());
        self
    }

    pub fn flag(self, column: &str, value: bool) -> Self {
        self.text(column, if value { "true" } else { "false" })
    }

    pub fn get(&self, column: &str) -> Option<&str> {
        self.0.get(column).map(String::as_str)
    }
}

#[derive(Debug, Clone)]
pub struct Table {
    pub columns: Vec<String>,
    pub rows: Vec<Row>,
}

impl Table {
    pub fn new(columns: &[&str]) -> Self {
        Self { columns: columns.iter().map(|c| c.to_string()).collect(), rows: Vec::new() }
    }

    pub fn add_column(&mut self, column: String) {
        if !self.columns.contains(&column) {
            self.columns.push(column);
        }
    }

    pub fn push(&mut self, row: Row) {
        debug_assert!(row.0.keys().all(|k| self.columns.contains(k)), "row has unknown columns");
        self.rows.push(row);
    }

    pub fn error_rows(&self) -> usize {
        self.rows.iter().filter(|r| r.get("status").is_some_and(|s| s != STATUS_OK)).count()
    }

    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(&self.columns).map_err(csv_err)?;
        for row in &self.rows {
            w.write_record(self.columns.iter().map(|c| row.get(c).unwrap_or(""))).map_err(csv_err)?;
        }
        let body = String::from_utf8(w.into_inner().map_err(|e| crate::Error::Parse(e.to_string()))?)
            .expect("csv output is utf-8");
        Ok(format!("{SCHEMA_LINE}\n{body}"))
    }

    /// Whitespace-separated numeric columns for plotting; non-numeric cells become NaN.
    pub fn to_series(&self, columns: &[&str]) -> String {
        let mut out = format!("# {}\n", columns.join(" "));
        for row in &self.rows {
            let cells: Vec<String> = columns
                .iter()
                .map(|c| row.get(c).filter(|v| v.parse::<f64>().is_ok()).unwrap_or("nan").to_string())
                .collect();
            out.push_str(&cells.join(" "));
            out.push('\n');
        }
        out
    }
}

fn csv_err(e: csv::Error) -> crate::Error {
    crate::Error::Parse(e.to_string())
}

/// A named pass/fail comparison of a measured value against a threshold.
#[derive(Debug, Clone, Serialize)]
pub struct Check {
    pub name: String,
    pub value: f64,
    /// "<=", ">=" or "==".
    pub relation: &'static str,
    pub threshold: f64,
    pub passed: bool,
}

impl Check {
    pub fn at_most(name: impl Into<String>, value: f64, threshold: f64) -> Self {
        Self { name: name.into(), value, relation: "<=", threshold, passed: value <= threshold }
    }

    pub fn at_least(name: impl Into<String>, value: f64, threshold: f64) -> Self {
        Self { name: name.into(), value, relation: ">=", threshold, passed: value >= threshold }
    }

    /// A boolean condition, recorded as value 1 or 0 against threshold 1.
    pub fn holds(name: impl Into<String>, ok: bool) -> Self {
        Self { name: name.into(), value: if ok { 1.0 } else { 0.0 }, relation: "==", threshold: 1.0, passed: ok }
    }
}

/// Everything a mode produces.
#[derive(Debug, Clone)]
pub struct Outcome {
    pub table: Table,
    pub checks: Vec<Check>,
    /// Mode-specific fits, verdicts and diagnostics.
    pub details: serde_json::Value,
    /// Columns for the plain-text series file.
    pub series_columns: Vec<&'static str>,
}

impl Outcome {
    pub fn error_rows(&self) -> usize {
        self.table.error_rows()
    }

    pub fn passed(&self) -> bool {
        self.error_rows() == 0 && self.checks.iter().all(|c| c.passed)
    }

    pub fn check(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }
}

#[derive(Serialize)]
struct Summary<'a> {
    schema: u32,
    mode: &'a str,
    passed: bool,
    error_rows: usize,
    checks: &'a [Check],
    details: &'a serde_json::Value,
    config: &'a super::config::RunConfig,
    elapsed_seconds: f64,
}

pub fn write_outputs(
    dir: &Path,
    mode: super::config::Mode,
    config: &super::config::RunConfig,
    outcome: &Outcome,
    elapsed_seconds: f64,
) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    std::fs::write(dir.join("results.csv"), outcome.table.to_csv()?)?;
    let summary = Summary {
        schema: 1,
        mode: mode.name(),
        passed: outcome.passed(),
        error_rows: outcome.error_rows(),
        checks: &outcome.checks,
        details: &outcome.details,
        config,
        elapsed_seconds,
    };
    let json = serde_json::to_string_pretty(&summary).map_err(|e| crate::Error::Parse(e.to_string()))?;
    std::fs::write(dir.join("summary.json"), json + "\n")?;
    if !outcome.series_columns.is_empty() {
        std::fs::write(dir.join("series.dat"), outcome.table.to_series(&outcome.series_columns))?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_has_schema_line_and_blank_missing_cells() {
        let mut t = Table::new(&["scale", "entropy", "status"]);
        t.push(Row::new().num("scale", 25.0).num("entropy", 0.5).text("status", STATUS_OK));
        t.push(Row::new().num("scale", 50.0).text("status", "error: tie"));
        let csv = t.to_csv().unwrap();
        assert_eq!(csv, "# schema=1\nscale,entropy,status\n25.0,0.5,ok\n50.0,,error: tie\n");
        assert_eq!(t.error_rows(), 1);
        assert_eq!(t.to_series(&["scale", "entropy"]), "# scale entropy\n25.0 0.5\n50.0 nan\n");
    }

    #[test]
    fn checks() {
        assert!(Check::at_most("a", 1.0, 1.0).passed);
        assert!(!Check::at_least("b", 0.5, 1.0).passed);
        assert!(!Check::holds("c", false).passed);
    }
}
