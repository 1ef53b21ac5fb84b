//! Plain numeric CSV: writing traces and reading price files back.
//!
//! Floats are written with 17 significant digits so values round-trip
//! exactly; NaN is written as an empty field and read back as NaN.

use std::fmt::Write as _;
use std::io::{self, Write};

use thiserror::Error;

use crate::model::Trace;
use crate::series::{PriceSeries, SeriesError};

/// Formats a float with 17 significant digits; NaN becomes an empty field.
pub fn fmt_float(v: f64) -> String {
    if v.is_nan() {
        String::new()
    } else if v.is_infinite() {
        if v > 0.0 { "inf".into() } else { "-inf".into() }
    } else {
        format!("{v:.16e}")
    }
}

/// A trace as CSV: `tick,price,<observables...>`.
pub fn trace_to_csv(trace: &Trace) -> String {
    let mut out = Vec::new();
    write_trace_csv(trace, &mut out).expect("writing to memory");
    String::from_utf8(out).expect("ASCII output")
}

/// Streams [`trace_to_csv`] output into `w`.
pub fn write_trace_csv<W: Write + ?Sized>(trace: &Trace, w: &mut W) -> io::Result<()> {
    let mut line = String::from("tick,price");
    for n in &trace.names {
        line.push(',');
        line.push_str(n);
    }
    line.push('\n');
    w.write_all(line.as_bytes())?;
    for i in 0..trace.len() {
        line.clear();
        let _ = write!(line, "{},{}", trace.ticks[i], fmt_float(trace.prices[i]));
        for c in &trace.columns {
            line.push(',');
            line.push_str(&fmt_float(c[i]));
        }
        line.push('\n');
        w.write_all(line.as_bytes())?;
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CsvError {
    #[error("no data rows")]
    Empty,
    #[error("line {line}: expected {expected} fields, found {found}")]
    Ragged {
        line: usize,
        expected: usize,
        found: usize,
    },
    #[error("line {line}, field {field}: `{text}` is not a number")]
    BadNumber { line: usize, field: usize, text: String },
    #[error("no column named `{0}`")]
    MissingColumn(String),
    #[error("column `{column}` line {line}: {reason}")]
    BadPrice {
        column: String,
        line: usize,
        reason: String,
    },
    #[error(transparent)]
    Series(#[from] SeriesError),
}

/// A numeric table with named columns.
#[derive(Debug, Clone, PartialEq)]
pub struct CsvTable {
    pub header: Vec<String>,
    pub columns: Vec<Vec<f64>>,
    /// Source line of each row, for error messages.
    pub lines: Vec<usize>,
}

impl CsvTable {
    pub fn rows(&self) -> usize {
        self.lines.len()
    }

    pub fn column(&self, name: &str) -> Option<&[f64]> {
        let i = self.header.iter().position(|h| h.eq_ignore_ascii_case(name))?;
        Some(&self.columns[i])
    }
}

fn parse_field(s: &str) -> Option<f64> {
    let s = s.trim();
    if s.is_empty() || s.eq_ignore_ascii_case("nan") {
        return Some(f64::NAN);
    }
    s.parse().ok()
}

/// Parses comma-separated numbers.
///
/// Blank lines and lines starting with `#` are skipped. The first remaining
/// line is a header when any of its fields is not a number; otherwise the
/// columns are named `c0`, `c1`, and so on.
pub fn parse_table(text: &str) -> Result<CsvTable, CsvError> {
    let mut rows = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim_end_matches('\r')))
        .filter(|(_, l)| !l.trim().is_empty() && !l.trim_start().starts_with('#'))
        .peekable();
    let Some(&(_, first)) = rows.peek() else {
        return Err(CsvError::Empty);
    };
    let first_fields: Vec<&str> = first.split(',').collect();
    let width = first_fields.len();
    let header = if first_fields.iter().any(|f| parse_field(f).is_none()) {
        rows.next();
        first_fields.iter().map(|f| f.trim().to_string()).collect()
    } else {
        (0..width).map(|i| format!("c{i}")).collect()
    };
    let mut columns = vec![Vec::new(); width];
    let mut lines = Vec::new();
    for (line, row) in rows {
        let fields: Vec<&str> = row.split(',').collect();
        if fields.len() != width {
            return Err(CsvError::Ragged {
                line,
                expected: width,
                found: fields.len(),
            });
        }
        for (i, f) in fields.iter().enumerate() {
            let v = parse_field(f).ok_or_else(|| CsvError::BadNumber {
                line,
                field: i + 1,
                text: f.trim().chars().take(40).collect(),
            })?;
            columns[i].push(v);
        }
        lines.push(line);
    }
    if lines.is_empty() {
        return Err(CsvError::Empty);
    }
    Ok(CsvTable { header, columns, lines })
}

/// Parses a price file: the named column, or `price`, or the only column.
///
/// A `tick` column, when present, sets the first tick of the series.
pub fn parse_prices(text: &str, column: Option<&str>) -> Result<PriceSeries, CsvError> {
    let table = parse_table(text)?;
    let name = match column {
        Some(c) => c.to_string(),
        None if table.column("price").is_some() => "price".into(),
        None if table.header.len() == 1 => table.header[0].clone(),
        None => return Err(CsvError::MissingColumn("price".into())),
    };
    let values = table
        .column(&name)
        .ok_or_else(|| CsvError::MissingColumn(name.clone()))?
        .to_vec();
    if let Some(i) = values.iter().position(|v| !v.is_finite()) {
        return Err(CsvError::BadPrice {
            column: name,
            line: table.lines[i],
            reason: "missing or non-finite".into(),
        });
    }
    let t0 = match table.column("tick") {
        Some(t) if t[0].is_finite() && t[0].fract() == 0.0 && t[0].abs() < 9e15 => t[0] as i64,
        _ => 0,
    };
    Ok(PriceSeries::new(values, t0)?)
}
