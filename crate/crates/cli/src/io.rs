//! CSV formats: curves, quotes, result tables, and the optional path dump.
//!
//! All files are UTF-8, comma-separated, dot-decimal, with a header row.
//! Rates and quotes are plain decimals (0.02 = 2%).

use std::fmt::Write as _;
use std::path::Path;

use collat_core::curves::{Quote, TermStructure};
use collat_core::dynamics::{FittedModel, Paths};

/// Parse/IO failure with position information; maps to exit code 2.
#[derive(Debug)]
pub struct FileError {
    pub path: String,
    pub line: Option<usize>,
    pub message: String,
}

impl std::fmt::Display for FileError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self.line {
            Some(n) => write!(f, "{}:{}: {}", self.path, n, self.message),
            None => write!(f, "{}: {}", self.path, self.message),
        }
    }
}

impl std::error::Error for FileError {}

fn file_err(path: &Path, line: Option<usize>, message: impl Into<String>) -> FileError {
    FileError { path: path.display().to_string(), line, message: message.into() }
}

fn read_two_column_csv(
    path: &Path,
    want_header: [&str; 2],
) -> Result<Vec<(f64, f64)>, FileError> {
    let text = std::fs::read_to_string(path).map_err(|e| file_err(path, None, e.to_string()))?;
    let mut rows = Vec::new();
    let mut lines = text.lines().enumerate();
    let (_, header) = lines
        .next()
        .ok_or_else(|| file_err(path, Some(1), "empty file"))?;
    let cols: Vec<&str> = header.split(',').map(str::trim).collect();
    if cols.len() != 2 || cols[0] != want_header[0] || cols[1] != want_header[1] {
        return Err(file_err(
            path,
            Some(1),
            format!("expected header '{},{}'", want_header[0], want_header[1]),
        ));
    }
    for (i, line) in lines {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let parts: Vec<&str> = line.split(',').map(str::trim).collect();
        if parts.len() != 2 {
            return Err(file_err(path, Some(i + 1), "expected two comma-separated fields"));
        }
        let a: f64 = parts[0]
            .parse()
            .map_err(|_| file_err(path, Some(i + 1), format!("bad number '{}'", parts[0])))?;
        let b: f64 = parts[1]
            .parse()
            .map_err(|_| file_err(path, Some(i + 1), format!("bad number '{}'", parts[1])))?;
        rows.push((a, b));
    }
    Ok(rows)
}

/// Curve file: `tenor_years,rate` pillar rows (piecewise-flat forwards).
pub fn read_curve_csv(path: &Path) -> Result<TermStructure, FileError> {
    let rows = read_two_column_csv(path, ["tenor_years", "rate"])?;
    TermStructure::new(&rows).map_err(|e| file_err(path, None, e.to_string()))
}

pub fn write_curve_csv(path: &Path, curve: &TermStructure) -> Result<(), FileError> {
    let mut out = String::from("tenor_years,rate\n");
    for (t, r) in curve.pillars() {
        let _ = writeln!(out, "{t},{r}");
    }
    std::fs::write(path, out).map_err(|e| file_err(path, None, e.to_string()))
}

/// Quote file: `maturity_years,quote`.
pub fn read_quote_csv(path: &Path) -> Result<Vec<Quote>, FileError> {
    let rows = read_two_column_csv(path, ["maturity_years", "quote"])?;
    Ok(rows.into_iter().map(|(m, v)| Quote::new(m, v)).collect())
}

/// One row of the experiment results table.
#[derive(Debug, Clone)]
pub struct ResultRow {
    pub experiment: String,
    pub sigma_y_bp: f64,
    pub side: &'static str,
    pub clean: f64,
    pub cca: f64,
    pub cva: f64,
    pub stderr_cca: f64,
    pub stderr_cva: f64,
}

pub fn write_results_csv(path: &Path, rows: &[ResultRow]) -> Result<(), FileError> {
    let mut out = String::from("experiment,sigma_y_bp,side,clean,cca,cva,stderr_cca,stderr_cva\n");
    for r in rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{}",
            r.experiment, r.sigma_y_bp, r.side, r.clean, r.cca, r.cva, r.stderr_cca, r.stderr_cva
        );
    }
    std::fs::write(path, out).map_err(|e| file_err(path, None, e.to_string()))
}

/// One row of the PDE-vs-Gateaux comparison table.
#[derive(Debug, Clone)]
pub struct PdeCompareCsvRow {
    pub sigma_y_bp: f64,
    pub side: &'static str,
    pub pde_minus_clean: f64,
    pub gateaux: f64,
    pub discrepancy_bp: f64,
}

pub fn write_pde_csv(path: &Path, rows: &[PdeCompareCsvRow]) -> Result<(), FileError> {
    let mut out = String::from("sigma_y_bp,side,pde_minus_clean,gateaux,discrepancy_bp\n");
    for r in rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{}",
            r.sigma_y_bp, r.side, r.pde_minus_clean, r.gateaux, r.discrepancy_bp
        );
    }
    std::fs::write(path, out).map_err(|e| file_err(path, None, e.to_string()))
}

/// One row of the netting-inequality table.
#[derive(Debug, Clone)]
pub struct NettingCsvRow {
    pub trial: usize,
    pub weight_a: f64,
    pub const_a: f64,
    pub maturity_a: f64,
    pub weight_b: f64,
    pub const_b: f64,
    pub maturity_b: f64,
    pub v_combined: f64,
    pub v_a: f64,
    pub v_b: f64,
    pub gap: f64,
    pub err: f64,
    pub holds: bool,
}

pub fn write_netting_csv(path: &Path, rows: &[NettingCsvRow]) -> Result<(), FileError> {
    let mut out = String::from(
        "trial,weight_a,const_a,maturity_a,weight_b,const_b,maturity_b,\
         v_combined,v_a,v_b,gap,err,holds\n",
    );
    for r in rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{},{},{},{}",
            r.trial,
            r.weight_a,
            r.const_a,
            r.maturity_a,
            r.weight_b,
            r.const_b,
            r.maturity_b,
            r.v_combined,
            r.v_a,
            r.v_b,
            r.gap,
            r.err,
            r.holds
        );
    }
    std::fs::write(path, out).map_err(|e| file_err(path, None, e.to_string()))
}

/// Dumps simulated paths: `path_id,time,c_dom,c_for,y,log_fx`. Large for
/// big path counts; meant for small diagnostic runs.
pub fn dump_paths_csv(
    path: &Path,
    fitted: &FittedModel,
    n_paths: usize,
    seed: u64,
) -> Result<(), FileError> {
    let lazy = fitted.lazy_paths(n_paths, seed);
    let mut out = String::from("path_id,time,c_dom,c_for,y,log_fx\n");
    for b in 0..lazy.n_blocks() {
        lazy.visit_block(b, &mut |p, nodes| {
            for n in nodes {
                let _ = writeln!(
                    out,
                    "{p},{},{},{},{},{}",
                    n.t, n.c_dom, n.c_for, n.y, n.ln_fx
                );
            }
        });
    }
    std::fs::write(path, out).map_err(|e| file_err(path, None, e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn curve_roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("c.csv");
        let curve = TermStructure::new(&[(0.0, 0.01), (2.0, 0.02), (10.0, 0.025)]).unwrap();
        write_curve_csv(&p, &curve).unwrap();
        let back = read_curve_csv(&p).unwrap();
        assert_eq!(curve, back);
    }

    #[test]
    fn malformed_rows_report_line_numbers() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("bad.csv");
        std::fs::write(&p, "maturity_years,quote\n1.0,0.002\noops\n").unwrap();
        let err = read_quote_csv(&p).unwrap_err();
        assert_eq!(err.line, Some(3));
        std::fs::write(&p, "wrong,header\n1.0,0.002\n").unwrap();
        let err = read_quote_csv(&p).unwrap_err();
        assert_eq!(err.line, Some(1));
    }
}
