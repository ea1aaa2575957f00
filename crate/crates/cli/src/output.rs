//! CSV emission with a fixed, locale-free number format.

use std::fs::File;
use std::io::{self, Write};
use std::path::Path;

/// One CSV field.
#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Num(f64),
    Int(i64),
    Text(String),
}

impl From<f64> for Cell {
    fn from(v: f64) -> Self {
        Cell::Num(v)
    }
}

impl From<usize> for Cell {
    fn from(v: usize) -> Self {
        Cell::Int(v as i64)
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

/// Seventeen significant digits in scientific notation, which round-trips every `f64`.
pub fn format_number(v: f64) -> String {
    format!("{v:.16e}")
}

fn render(cell: &Cell) -> String {
    match cell {
        Cell::Num(v) => format_number(*v),
        Cell::Int(v) => v.to_string(),
        Cell::Text(s) => s.clone(),
    }
}

/// Writes `header` and `rows` as CSV with LF line endings.
pub fn write_csv<W: Write>(sink: W, header: &[&str], rows: &[Vec<Cell>]) -> io::Result<()> {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(sink);
    w.write_record(header)?;
    for (i, row) in rows.iter().enumerate() {
        if row.len() != header.len() {
            return Err(io::Error::new(
                io::ErrorKind::InvalidInput,
                format!("row {i} has {} fields, header has {}", row.len(), header.len()),
            ));
        }
        w.write_record(row.iter().map(render))?;
    }
    w.flush()
}

/// Writes the CSV to `path`.
pub fn emit_csv(rows: &[Vec<Cell>], header: &[&str], path: &Path) -> io::Result<()> {
    let file = File::create(path)?;
    write_csv(io::BufWriter::new(file), header, rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn number_format_round_trips() {
        for v in [0.0, -0.0, 1.0, 0.1, 1.0 / 3.0, 6.02e23, -2.5e-300, f64::MAX] {
            let s = format_number(v);
            assert_eq!(s.parse::<f64>().unwrap().to_bits(), v.to_bits(), "{s}");
        }
        assert_eq!(format_number(0.25), "2.5000000000000000e-1");
    }

    #[test]
    fn header_only() {
        let mut buf = Vec::new();
        write_csv(&mut buf, &["t", "mean"], &[]).unwrap();
        assert_eq!(buf, b"t,mean\n");
    }

    #[test]
    fn ragged_rows_rejected() {
        let mut buf = Vec::new();
        let rows = vec![vec![Cell::from(1.0)]];
        assert!(write_csv(&mut buf, &["a", "b"], &rows).is_err());
    }
}
