//! CSV input and output.
//!
//! Data files carry a header `x1,…,xp,y` (`x,y` is accepted for one
//! covariate). Numbers are written with the shortest representation that
//! round-trips, so output is byte-stable.

use std::fs::File;
use std::io::Write;
use std::path::Path;

use crate::error::{invalid, Error, Result};
use crate::frontier::{CurvePoint, Dataset, Orientation};
use crate::sim::{ComparisonSummary, MetricsTable};

pub const CURVE_HEADER: &str = "x,a_tilde,a_smooth,status,h_used";

fn check_header(path: &Path, names: &[String]) -> Result<usize> {
    let malformed = |reason: String| Error::MalformedRow {
        path: path.to_path_buf(),
        line: 1,
        reason,
    };
    if names.len() < 2 || names.last().map(String::as_str) != Some("y") {
        return Err(malformed("header must be x1,...,xp,y".into()));
    }
    let p = names.len() - 1;
    for (k, name) in names[..p].iter().enumerate() {
        let ok = *name == format!("x{}", k + 1) || (p == 1 && name == "x");
        if !ok {
            return Err(malformed(format!("unexpected column '{name}'")));
        }
    }
    Ok(p)
}

/// Read a dataset; responses are taken in the given orientation.
pub fn load_csv(path: &Path, orientation: Orientation) -> Result<Dataset> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_path(path)?;
    let names: Vec<String> = reader.headers()?.iter().map(str::to_string).collect();
    let p = check_header(path, &names)?;
    let mut design = Vec::new();
    let mut response = Vec::new();
    for (k, record) in reader.records().enumerate() {
        let record = record?;
        let line = record.position().map_or(k + 2, |pos| pos.line() as usize);
        if record.len() != p + 1 {
            return Err(Error::MalformedRow {
                path: path.to_path_buf(),
                line,
                reason: format!("expected {} fields, found {}", p + 1, record.len()),
            });
        }
        for (j, field) in record.iter().enumerate() {
            let v: f64 = field.parse().map_err(|_| Error::MalformedRow {
                path: path.to_path_buf(),
                line,
                reason: format!("'{field}' is not a number"),
            })?;
            if !v.is_finite() {
                return Err(Error::NonFinite {
                    path: path.to_path_buf(),
                    line,
                });
            }
            if j < p {
                design.push(v);
            } else {
                response.push(v);
            }
        }
    }
    if response.is_empty() {
        return Err(invalid(format!("{} has no data rows", path.display())));
    }
    Dataset::new(design, p, response, orientation)
}

/// Write a dataset in its user orientation.
pub fn write_csv(data: &Dataset, path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    let mut header: Vec<String> = (1..=data.dim()).map(|k| format!("x{k}")).collect();
    header.push("y".into());
    w.write_record(&header)?;
    for i in 0..data.len() {
        let mut row: Vec<String> = data.point(i).iter().map(|v| v.to_string()).collect();
        row.push(data.response(i).to_string());
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

/// A single-column residual file with header `residual`.
pub fn load_residuals(path: &Path) -> Result<Vec<f64>> {
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_path(path)?;
    let mut out = Vec::new();
    for (k, record) in reader.records().enumerate() {
        let record = record?;
        let line = record.position().map_or(k + 2, |pos| pos.line() as usize);
        let field = record.get(0).unwrap_or("");
        let v: f64 = field.parse().map_err(|_| Error::MalformedRow {
            path: path.to_path_buf(),
            line,
            reason: format!("'{field}' is not a number"),
        })?;
        if !v.is_finite() {
            return Err(Error::NonFinite {
                path: path.to_path_buf(),
                line,
            });
        }
        out.push(v);
    }
    Ok(out)
}

/// One output row of a frontier curve.
#[derive(Debug, Clone, PartialEq)]
pub struct CurveRow {
    pub x: Vec<f64>,
    pub a_tilde: f64,
    pub a_smooth: f64,
    pub status: String,
    pub h_used: f64,
}

impl CurveRow {
    pub fn from_point(p: &CurvePoint) -> Self {
        let (a_smooth, status) = match p.a_smooth {
            Ok(v) => (v, p.status.as_str().to_string()),
            Err(kind) if p.status == crate::frontier::FitStatus::Bounded => (f64::NAN, kind.to_string()),
            Err(_) => (f64::NAN, p.status.as_str().to_string()),
        };
        Self {
            x: p.x.clone(),
            a_tilde: p.a_tilde,
            a_smooth,
            status,
            h_used: p.h_used,
        }
    }

    /// A grid point where no bandwidth could be chosen.
    pub fn failed(x: Vec<f64>, kind: &str) -> Self {
        Self {
            x,
            a_tilde: f64::NAN,
            a_smooth: f64::NAN,
            status: kind.to_string(),
            h_used: f64::NAN,
        }
    }

    pub fn is_bounded(&self) -> bool {
        self.status == "bounded"
    }
}

/// Curve CSV. Multivariate locations are written as `x1;x2;…` in the `x`
/// column.
pub fn write_curve(rows: &[CurveRow], out: &mut dyn Write) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(CURVE_HEADER.split(','))?;
    for r in rows {
        let x = r.x.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(";");
        w.write_record([
            x,
            r.a_tilde.to_string(),
            r.a_smooth.to_string(),
            r.status.clone(),
            r.h_used.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_metrics(table: &MetricsTable, out: &mut dyn Write) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(MetricsTable::HEADER.split(','))?;
    for r in &table.rows {
        w.write_record([
            r.model.to_string(),
            r.a0.to_string(),
            r.c.to_string(),
            r.n.to_string(),
            r.mean_h.to_string(),
            r.bias10().to_string(),
            r.var100().to_string(),
            r.mse100().to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub const COMPARISON_HEADER: &str = "model,a0,c,n,h_hat,mse_hat,h_naive,mse_naive,ratio";

pub fn write_comparison(summary: &ComparisonSummary, out: &mut dyn Write) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(COMPARISON_HEADER.split(','))?;
    for r in &summary.rows {
        w.write_record([
            r.model.to_string(),
            r.a0.to_string(),
            r.c.to_string(),
            r.n.to_string(),
            r.first.h.to_string(),
            r.first.mse.to_string(),
            r.second.h.to_string(),
            r.second.mse.to_string(),
            r.ratio().to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Table layout for the terminal: blank model and a0 cells repeat the row
/// above.
pub fn format_metrics_table(table: &MetricsTable) -> String {
    let mut s = format!(
        "{:<6}{:<7}{:<6}{:<6}{:>9}{:>10}{:>10}{:>10}\n",
        "Model", "a0", "c", "n", "Mean(h)", "10 Bias", "100 Var", "100 MSE"
    );
    let mut prev: Option<(u8, f64, usize)> = None;
    for r in &table.rows {
        let key = (r.model, r.a0, r.n);
        let (m, a) = if prev == Some(key) {
            (String::new(), String::new())
        } else {
            (r.model.to_string(), r.a0.to_string())
        };
        prev = Some(key);
        s += &format!(
            "{:<6}{:<7}{:<6}{:<6}{:>9.3}{:>10.3}{:>10.3}{:>10.3}\n",
            m,
            a,
            r.c,
            r.n,
            r.mean_h,
            r.bias10(),
            r.var100(),
            r.mse100()
        );
    }
    s
}

/// Create `path`, or use stdout when `path` is `None` or `-`.
pub fn open_output(path: Option<&Path>) -> Result<Box<dyn Write>> {
    match path {
        Some(p) if p.as_os_str() != "-" => Ok(Box::new(File::create(p)?)),
        _ => Ok(Box::new(std::io::stdout())),
    }
}
