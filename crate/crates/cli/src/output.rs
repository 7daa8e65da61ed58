//! Result rows and their CSV form.

use std::io::{Read, Write};

use crate::config::Command;

pub const HEADER: [&str; 11] =
    ["command", "d", "k", "n", "estimate", "stderr", "lower_bound", "upper_bound", "seed", "samples", "elapsed_ms"];

#[derive(Debug, Clone, PartialEq)]
pub struct ResultRow {
    pub command: Command,
    pub d: usize,
    pub k: Option<usize>,
    pub n: Option<usize>,
    pub estimate: f64,
    pub stderr: f64,
    pub lower_bound: f64,
    pub upper_bound: f64,
    pub seed: u64,
    pub samples: u64,
    pub elapsed_ms: f64,
}

impl ResultRow {
    /// Equality up to the written precision, ignoring `elapsed_ms`.
    pub fn same_result(&self, other: &ResultRow) -> bool {
        let num = |a: f64, b: f64| format_sig(a) == format_sig(b);
        self.command == other.command
            && (self.d, self.k, self.n, self.seed, self.samples) == (other.d, other.k, other.n, other.seed, other.samples)
            && num(self.estimate, other.estimate)
            && num(self.stderr, other.stderr)
            && num(self.lower_bound, other.lower_bound)
            && num(self.upper_bound, other.upper_bound)
    }

    fn record(&self) -> [String; 11] {
        let opt = |v: Option<usize>| v.map_or_else(String::new, |v| v.to_string());
        [
            self.command.to_string(),
            self.d.to_string(),
            opt(self.k),
            opt(self.n),
            format_sig(self.estimate),
            format_sig(self.stderr),
            format_sig(self.lower_bound),
            format_sig(self.upper_bound),
            self.seed.to_string(),
            self.samples.to_string(),
            format_sig(self.elapsed_ms),
        ]
    }
}

/// Twelve significant digits, `%g` style; infinities as `inf` / `-inf`.
pub fn format_sig(x: f64) -> String {
    if x.is_nan() {
        return "nan".to_string();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf" } else { "-inf" }.to_string();
    }
    if x == 0.0 {
        return "0".to_string();
    }
    let sci = format!("{x:.11e}");
    let (mantissa, exp) = sci.split_once('e').expect("exponent form");
    let exp: i32 = exp.parse().expect("integer exponent");
    let trim = |s: &str| -> String {
        if s.contains('.') {
            s.trim_end_matches('0').trim_end_matches('.').to_string()
        } else {
            s.to_string()
        }
    };
    if (-4..12).contains(&exp) {
        trim(&format!("{x:.prec$}", prec = (11 - exp) as usize))
    } else {
        format!("{}e{exp}", trim(mantissa))
    }
}

#[derive(Debug, thiserror::Error)]
pub enum CsvError {
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),
    #[error("row {row}: column `{column}`: {message}")]
    Field { row: usize, column: &'static str, message: String },
}

/// Header plus one line per row, in the given order.
pub fn write_csv<W: Write>(rows: &[ResultRow], out: W) -> Result<(), CsvError> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(out);
    w.write_record(HEADER)?;
    for row in rows {
        w.write_record(row.record())?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_csv_path(rows: &[ResultRow], path: &std::path::Path) -> Result<(), CsvError> {
    write_csv(rows, std::fs::File::create(path)?)
}

pub fn read_csv<R: Read>(input: R) -> Result<Vec<ResultRow>, CsvError> {
    let mut r = csv::ReaderBuilder::new().has_headers(true).from_reader(input);
    let header = r.headers()?.clone();
    if header.iter().ne(HEADER) {
        return Err(CsvError::Field { row: 0, column: "header", message: format!("unexpected header {header:?}") });
    }
    let mut rows = Vec::new();
    for (i, record) in r.records().enumerate() {
        let record = record?;
        let row = i + 1;
        let field = |c: usize| record.get(c).unwrap_or("");
        let fail = |c: usize, message: String| CsvError::Field { row, column: HEADER[c], message };
        let int = |c: usize| field(c).parse::<u64>().map_err(|e| fail(c, e.to_string()));
        let opt = |c: usize| match field(c) {
            "" => Ok(None),
            s => s.parse::<usize>().map(Some).map_err(|e| fail(c, e.to_string())),
        };
        let real = |c: usize| field(c).parse::<f64>().map_err(|e| fail(c, e.to_string()));
        rows.push(ResultRow {
            command: field(0).parse().map_err(|m| fail(0, m))?,
            d: int(1)? as usize,
            k: opt(2)?,
            n: opt(3)?,
            estimate: real(4)?,
            stderr: real(5)?,
            lower_bound: real(6)?,
            upper_bound: real(7)?,
            seed: int(8)?,
            samples: int(9)?,
            elapsed_ms: real(10)?,
        });
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn significant_digits() {
        assert_eq!(format_sig(1.5), "1.5");
        assert_eq!(format_sig(1.2801760409267), "1.28017604093");
        assert_eq!(format_sig(1.0 / 3.0), "0.333333333333");
        assert_eq!(format_sig(123456789012345.0), "1.23456789012e14");
        assert_eq!(format_sig(0.0000123456), "1.23456e-5");
        assert_eq!(format_sig(-2.0), "-2");
        assert_eq!(format_sig(f64::INFINITY), "inf");
        assert_eq!(format_sig(9.999999999999999), "10");
        assert_eq!(format_sig(24.0), "24");
    }

    #[test]
    fn empty_rows_give_header_only() {
        let mut buf = Vec::new();
        write_csv(&[], &mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), format!("{}\n", HEADER.join(",")));
    }

    #[test]
    fn rows_reparse() {
        let row = ResultRow {
            command: Command::ZMoments,
            d: 2,
            k: Some(3),
            n: None,
            estimate: 2.123456789012345,
            stderr: 0.001,
            lower_bound: 6.0 / 64.0,
            upper_bound: f64::INFINITY,
            seed: u64::MAX,
            samples: 100,
            elapsed_ms: 12.5,
        };
        let mut buf = Vec::new();
        write_csv(std::slice::from_ref(&row), &mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert_eq!(text.lines().count(), 2);
        let back = read_csv(buf.as_slice()).unwrap();
        assert_eq!(back.len(), 1);
        assert!(back[0].same_result(&row));
        assert_eq!(back[0].upper_bound, f64::INFINITY);
        assert!(read_csv("a,b\n1,2\n".as_bytes()).is_err());
    }
}
