//! Per-L differences between two results.csv files and the trend of each
//! difference against ln L.

use serde::Serialize;
use std::path::Path;

use crate::error::{Error, Result};
use crate::scaling_fit::{slope_vs_log, TrendFit};

pub const CONFIDENCE: f64 = 0.95;
/// Relative tolerance for matching L values between files.
const SCALE_MATCH: f64 = 1e-12;

/// Numeric view of the ok rows of a results file; non-numeric cells are None.
#[derive(Debug, Clone)]
pub struct NumericTable {
    pub headers: Vec<String>,
    pub rows: Vec<Vec<Option<f64>>>,
}

impl NumericTable {
    pub fn column(&self, name: &str) -> Option<usize> {
        self.headers.iter().position(|h| h == name)
    }
}

pub fn read_results(path: &Path) -> Result<NumericTable> {
    let mut rdr = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .from_path(path)
        .map_err(|e| Error::Parse(format!("{}: {e}", path.display())))?;
    let headers: Vec<String> =
        rdr.headers().map_err(|e| Error::Parse(format!("{}: {e}", path.display())))?.iter().map(String::from).collect();
    let status = headers.iter().position(|h| h == "status");
    let mut rows = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| Error::Parse(format!("{}: {e}", path.display())))?;
        if status.is_some_and(|i| rec.get(i) != Some(super::output::STATUS_OK)) {
            continue;
        }
        rows.push(rec.iter().map(|c| c.parse::<f64>().ok()).collect());
    }
    Ok(NumericTable { headers, rows })
}

#[derive(Debug, Clone, Serialize)]
pub struct ColumnDelta {
    pub column: String,
    /// b − a at each L.
    pub deltas: Vec<f64>,
    pub max_abs_delta: f64,
    pub trend: Option<TrendFit>,
    pub slope_interval: Option<(f64, f64)>,
}

#[derive(Debug, Clone, Serialize)]
pub struct CompareReport {
    pub scales: Vec<f64>,
    pub columns: Vec<ColumnDelta>,
}

fn scale_column(t: &NumericTable, path: &Path) -> Result<Vec<f64>> {
    let i = t.column("scale").ok_or_else(|| Error::Parse(format!("{}: no scale column", path.display())))?;
    t.rows
        .iter()
        .map(|r| r[i].ok_or_else(|| Error::Parse(format!("{}: non-numeric scale", path.display()))))
        .collect()
}

pub fn compare_files(a: &Path, b: &Path) -> Result<CompareReport> {
    let ta = read_results(a)?;
    let tb = read_results(b)?;
    let la = scale_column(&ta, a)?;
    let lb = scale_column(&tb, b)?;
    if la.len() != lb.len() || la.iter().zip(&lb).any(|(x, y)| (x - y).abs() > SCALE_MATCH * x.abs().max(1.0)) {
        return Err(Error::Precondition(format!("mismatched L grids: {la:?} vs {lb:?}")));
    }
    let mut columns = Vec::new();
    for (ia, name) in ta.headers.iter().enumerate() {
        if name == "scale" {
            continue;
        }
        let Some(ib) = tb.column(name) else { continue };
        let pairs: Option<Vec<(f64, f64)>> =
            ta.rows.iter().zip(&tb.rows).map(|(ra, rb)| Some((ra[ia]?, rb[ib]?))).collect();
        let Some(pairs) = pairs else { continue };
        if pairs.is_empty() {
            continue;
        }
        let deltas: Vec<f64> = pairs.iter().map(|(x, y)| y - x).collect();
        let trend = slope_vs_log(&la, &deltas).ok();
        columns.push(ColumnDelta {
            column: name.clone(),
            max_abs_delta: deltas.iter().fold(0.0, |m, d| m.max(d.abs())),
            slope_interval: trend.and_then(|t| t.slope_interval(CONFIDENCE)),
            trend,
            deltas,
        });
    }
    Ok(CompareReport { scales: la, columns })
}

impl CompareReport {
    pub fn column(&self, name: &str) -> Option<&ColumnDelta> {
        self.columns.iter().find(|c| c.column == name)
    }

    pub fn render(&self) -> String {
        let mut out = format!("L grid: {:?}\n", self.scales);
        out.push_str("column\tmax|delta|\tslope_vs_lnL\t95% interval\n");
        for c in &self.columns {
            let slope = c.trend.map_or("-".to_string(), |t| format!("{:.6e}", t.slope));
            let ci = c.slope_interval.map_or("-".to_string(), |(lo, hi)| format!("[{lo:.3e}, {hi:.3e}]"));
            out.push_str(&format!("{}\t{:.6e}\t{slope}\t{ci}\n", c.column, c.max_abs_delta));
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn write(dir: &Path, name: &str, body: &str) -> std::path::PathBuf {
        let p = dir.join(name);
        std::fs::write(&p, body).unwrap();
        p
    }

    #[test]
    fn identical_files_have_zero_deltas() {
        let dir = tempfile::tempdir().unwrap();
        let body = "# schema=1\nscale,entropy_nats,shape,status\n25,1.0,interval,ok\n50,1.2,interval,ok\n100,1.4,interval,ok\n";
        let a = write(dir.path(), "a.csv", body);
        let rep = compare_files(&a, &a).unwrap();
        let c = rep.column("entropy_nats").unwrap();
        assert_eq!(c.max_abs_delta, 0.0);
        assert!(rep.column("shape").is_none());
        assert!(rep.render().contains("entropy_nats"));
    }

    #[test]
    fn trend_and_grid_mismatch() {
        let dir = tempfile::tempdir().unwrap();
        let a = write(dir.path(), "a.csv", "scale,x\n25,0\n50,0\n100,0\n200,0\n");
        let b = write(
            dir.path(),
            "b.csv",
            &format!("scale,x\n25,{}\n50,{}\n100,{}\n200,{}\n", 25f64.ln() * 0.5, 50f64.ln() * 0.5, 100f64.ln() * 0.5, 200f64.ln() * 0.5),
        );
        let rep = compare_files(&a, &b).unwrap();
        assert!((rep.column("x").unwrap().trend.unwrap().slope - 0.5).abs() < 1e-12);
        let c = write(dir.path(), "c.csv", "scale,x\n25,0\n50,0\n");
        assert!(compare_files(&a, &c).is_err());
    }

    #[test]
    fn error_rows_are_skipped() {
        let dir = tempfile::tempdir().unwrap();
        let a = write(dir.path(), "a.csv", "scale,x,status\n25,1,ok\n50,,error: tie\n");
        let t = read_results(&a).unwrap();
        assert_eq!(t.rows.len(), 1);
    }
}
