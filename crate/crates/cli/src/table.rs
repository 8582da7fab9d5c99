//! CSV output and the matching reader.
//!
//! A table starts with `# key=value` comment lines, then a header row.
//! Prices are written with six decimals and differences in scientific
//! notation.

use std::io::{Read, Write};

use crate::CliError;

#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub comments: Vec<(String, String)>,
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(header: Vec<String>) -> Self {
        Self {
            comments: Vec::new(),
            header,
            rows: Vec::new(),
        }
    }

    pub fn comment(&mut self, key: &str, value: impl ToString) {
        self.comments.push((key.to_string(), value.to_string()));
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn column(&self, name: &str) -> Option<usize> {
        self.header.iter().position(|h| h == name)
    }

    /// Value of a `# key=value` line.
    pub fn meta(&self, key: &str) -> Option<&str> {
        self.comments.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
    }

    pub fn f64_at(&self, row: usize, col: &str) -> Option<f64> {
        let c = self.column(col)?;
        self.rows.get(row)?.get(c)?.parse().ok()
    }

    pub fn write<W: Write>(&self, mut out: W) -> Result<(), CliError> {
        for (k, v) in &self.comments {
            writeln!(out, "# {k}={v}").map_err(io_err)?;
        }
        let mut w = csv::Writer::from_writer(out);
        w.write_record(&self.header).map_err(csv_err)?;
        for r in &self.rows {
            w.write_record(r).map_err(csv_err)?;
        }
        w.flush().map_err(io_err)
    }

    pub fn to_string(&self) -> Result<String, CliError> {
        let mut buf = Vec::new();
        self.write(&mut buf)?;
        String::from_utf8(buf).map_err(|e| CliError::Numeric(e.to_string()))
    }

    /// Parses anything [`Table::write`] produced.
    pub fn read<R: Read>(mut input: R) -> Result<Self, CliError> {
        let mut text = String::new();
        input.read_to_string(&mut text).map_err(io_err)?;
        let comments = text
            .lines()
            .filter_map(|l| l.strip_prefix('#'))
            .filter_map(|l| l.trim().split_once('='))
            .map(|(k, v)| (k.trim().to_string(), v.trim().to_string()))
            .collect();
        let mut r = csv::ReaderBuilder::new()
            .comment(Some(b'#'))
            .from_reader(text.as_bytes());
        let header = r.headers().map_err(csv_err)?.iter().map(String::from).collect();
        let rows = r
            .records()
            .map(|rec| rec.map(|r| r.iter().map(String::from).collect()))
            .collect::<Result<_, _>>()
            .map_err(csv_err)?;
        Ok(Self {
            comments,
            header,
            rows,
        })
    }
}

pub fn fmt_price(x: f64) -> String {
    format!("{x:.6}")
}

pub fn fmt_diff(x: f64) -> String {
    format!("{x:.3e}")
}

fn io_err(e: std::io::Error) -> CliError {
    CliError::Config(format!("output: {e}"))
}

fn csv_err(e: csv::Error) -> CliError {
    CliError::Config(format!("csv: {e}"))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip() {
        let mut t = Table::new(vec!["maturity".into(), "regime".into(), "series".into()]);
        t.comment("seed", 7);
        t.push(vec!["0.25".into(), "1".into(), fmt_price(0.99213)]);
        let s = t.to_string().unwrap();
        assert!(s.starts_with("# seed=7\n"));
        let back = Table::read(s.as_bytes()).unwrap();
        assert_eq!(back, t);
        assert_eq!(back.f64_at(0, "series"), Some(0.99213));
    }

    #[test]
    fn formats() {
        assert_eq!(fmt_price(0.5), "0.500000");
        assert_eq!(fmt_diff(0.000123456), "1.235e-4");
    }
}
