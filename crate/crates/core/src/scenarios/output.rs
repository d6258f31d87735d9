//! CSV and JSON writers with a fixed, byte-stable layout.

use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::dynamics::TimeSeries;
use crate::error::Result;

/// Full double precision: 17 significant digits.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

/// One CSV cell.
#[derive(Clone, Debug, PartialEq)]
pub enum Cell {
    Float(f64),
    Int(i64),
    Text(String),
}

impl Cell {
    fn render(&self) -> String {
        match self {
            Cell::Float(x) => fmt_f64(*x),
            Cell::Int(i) => i.to_string(),
            Cell::Text(s) => s.clone(),
        }
    }
}

pub fn ensure_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir)?;
    Ok(())
}

pub fn csv_string<S: AsRef<str>>(header: &[S], rows: &[Vec<Cell>]) -> Result<String> {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(Vec::new());
    w.write_record(header.iter().map(|h| h.as_ref()))?;
    for row in rows {
        w.write_record(row.iter().map(Cell::render))?;
    }
    let bytes = w.into_inner().map_err(|e| e.into_error())?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

pub fn write_csv<S: AsRef<str>>(path: &Path, header: &[S], rows: &[Vec<Cell>]) -> Result<PathBuf> {
    fs::write(path, csv_string(header, rows)?)?;
    Ok(path.to_path_buf())
}

/// `time` followed by every channel, in channel order.
pub fn series_rows(series: &TimeSeries) -> (Vec<String>, Vec<Vec<Cell>>) {
    let mut header = vec!["time".to_string()];
    header.extend(series.names().map(str::to_string));
    let rows = (0..series.len())
        .map(|i| {
            std::iter::once(Cell::Float(series.times[i]))
                .chain(series.channels.iter().map(|(_, v)| Cell::Float(v[i])))
                .collect()
        })
        .collect();
    (header, rows)
}

pub fn write_series(path: &Path, series: &TimeSeries) -> Result<PathBuf> {
    let (header, rows) = series_rows(series);
    write_csv(path, &header, &rows)
}

pub fn json_string<T: Serialize>(value: &T) -> Result<String> {
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    Ok(s)
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<PathBuf> {
    fs::write(path, json_string(value)?)?;
    Ok(path.to_path_buf())
}
