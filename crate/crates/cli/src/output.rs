//! CSV emission. Reals use nine significant digits and NaN is spelled `NaN`.

use std::fs::File;
use std::io::Write;
use std::path::Path;

use dqlos_core::numfmt::sig9;
use dqlos_core::TraceRow;

pub const TRACE_HEADER: [&str; 8] = ["gen", "con", "fea", "div", "op", "reward", "igd_plus", "hv"];

/// A CSV cell.
#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Real(f64),
    Int(u64),
    Text(String),
}

impl Cell {
    fn render(&self) -> String {
        match self {
            Cell::Real(v) => sig9(*v),
            Cell::Int(v) => v.to_string(),
            Cell::Text(s) => s.clone(),
        }
    }
}

impl From<f64> for Cell {
    fn from(v: f64) -> Self {
        Cell::Real(v)
    }
}

impl From<usize> for Cell {
    fn from(v: usize) -> Self {
        Cell::Int(v as u64)
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

/// Writes `header` and `rows` to any writer.
pub fn write_rows<W: Write>(out: W, header: &[&str], rows: &[Vec<Cell>]) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(header)?;
    for row in rows {
        w.write_record(row.iter().map(Cell::render))?;
    }
    w.flush()?;
    Ok(())
}

/// Writes a CSV file, creating parent directories as needed.
pub fn write_csv(path: &Path, header: &[&str], rows: &[Vec<Cell>]) -> anyhow::Result<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent)?;
    }
    let file = File::create(path).map_err(|e| anyhow::anyhow!("cannot write {}: {e}", path.display()))?;
    write_rows(file, header, rows)?;
    Ok(())
}

pub fn trace_rows(trace: &[TraceRow]) -> Vec<Vec<Cell>> {
    trace
        .iter()
        .map(|r| {
            vec![
                r.gen.into(),
                r.s.con.into(),
                r.s.fea.into(),
                r.s.div.into(),
                r.op.label().into(),
                r.reward.into(),
                r.igd_plus.into(),
                r.hv.into(),
            ]
        })
        .collect()
}

/// Header `f1,f2,...` for `m` objectives.
pub fn objective_header(m: usize) -> Vec<String> {
    (1..=m).map(|j| format!("f{j}")).collect()
}

pub fn point_rows(points: &[Vec<f64>]) -> Vec<Vec<Cell>> {
    points
        .iter()
        .map(|p| p.iter().map(|&v| Cell::Real(v)).collect())
        .collect()
}

/// Writes objective vectors with an `f1,f2,...` header.
pub fn write_points<W: Write>(out: W, points: &[Vec<f64>], m: usize) -> csv::Result<()> {
    let header = objective_header(m);
    let header: Vec<&str> = header.iter().map(String::as_str).collect();
    write_rows(out, &header, &point_rows(points))
}
