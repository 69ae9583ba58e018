//! Output encodings.
//!
//! Every float is written as `{:.16e}`, i.e. scientific notation with 17
//! significant digits, which round-trips through any IEEE-754 parser.
//!
//! - Tables are delimiter-separated with one `# hrru <version> kind=<kind>
//!   seed=<seed>` comment line, then a fixed header row. Missing values are
//!   written as `NA`.
//! - Reports are pretty-printed JSON objects whose fields appear in
//!   declaration order, starting with `schema`, `tool`, `version`, `kind`,
//!   `seed`.

use std::fmt::Write as _;
use std::io;

use serde::Serialize;
use serde_json::ser::{Formatter, PrettyFormatter};

use crate::config::TableFormat;

pub const TOOL: &str = "hrru";
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
pub const REPORT_SCHEMA: &str = "hrru-report/1";

pub fn format_f64(v: f64) -> String {
    format!("{v:.16e}")
}

/// Pretty JSON with fixed 17-significant-digit floats.
struct ReportFormatter<'a>(PrettyFormatter<'a>);

impl Formatter for ReportFormatter<'_> {
    fn write_f32<W: ?Sized + io::Write>(&mut self, w: &mut W, v: f32) -> io::Result<()> {
        self.write_f64(w, f64::from(v))
    }

    fn write_f64<W: ?Sized + io::Write>(&mut self, w: &mut W, v: f64) -> io::Result<()> {
        w.write_all(format_f64(v).as_bytes())
    }

    fn begin_array<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.begin_array(w)
    }

    fn end_array<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_array(w)
    }

    fn begin_array_value<W: ?Sized + io::Write>(&mut self, w: &mut W, first: bool) -> io::Result<()> {
        self.0.begin_array_value(w, first)
    }

    fn end_array_value<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_array_value(w)
    }

    fn begin_object<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.begin_object(w)
    }

    fn end_object<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_object(w)
    }

    fn begin_object_key<W: ?Sized + io::Write>(&mut self, w: &mut W, first: bool) -> io::Result<()> {
        self.0.begin_object_key(w, first)
    }

    fn begin_object_value<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.begin_object_value(w)
    }

    fn end_object_value<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_object_value(w)
    }
}

/// Serialize `value` as a report document, newline-terminated.
pub fn to_report_json<T: Serialize>(value: &T) -> Vec<u8> {
    let mut out = Vec::new();
    let mut ser =
        serde_json::Serializer::with_formatter(&mut out, ReportFormatter(PrettyFormatter::new()));
    value
        .serialize(&mut ser)
        .expect("report values serialize to JSON");
    out.push(b'\n');
    out
}

/// A table cell.
#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Int(i128),
    Float(f64),
    Text(String),
    Missing,
}

impl From<u64> for Cell {
    fn from(v: u64) -> Self {
        Cell::Int(v.into())
    }
}

impl From<i64> for Cell {
    fn from(v: i64) -> Self {
        Cell::Int(v.into())
    }
}

impl From<f64> for Cell {
    fn from(v: f64) -> Self {
        Cell::Float(v)
    }
}

impl From<bool> for Cell {
    fn from(v: bool) -> Self {
        Cell::Int(v.into())
    }
}

impl From<&str> for Cell {
    fn from(v: &str) -> Self {
        Cell::Text(v.to_string())
    }
}

impl<T: Into<Cell>> From<Option<T>> for Cell {
    fn from(v: Option<T>) -> Self {
        v.map_or(Cell::Missing, Into::into)
    }
}

#[derive(Debug, Clone)]
pub struct Table {
    format: TableFormat,
    text: String,
    columns: usize,
}

impl Table {
    pub fn new(format: TableFormat, kind: &str, seed: u64, header: &[&str]) -> Self {
        let mut text = format!("# {TOOL} {VERSION} kind={kind} seed={seed}\n");
        text.push_str(&header.join(&format.delimiter().to_string()));
        text.push('\n');
        Table {
            format,
            text,
            columns: header.len(),
        }
    }

    pub fn row(&mut self, cells: Vec<Cell>) {
        assert_eq!(cells.len(), self.columns, "row width must match the header");
        for (i, cell) in cells.iter().enumerate() {
            if i > 0 {
                self.text.push(self.format.delimiter());
            }
            match cell {
                Cell::Int(v) => write!(self.text, "{v}").unwrap(),
                Cell::Float(v) => self.text.push_str(&format_f64(*v)),
                Cell::Text(s) => self.text.push_str(s),
                Cell::Missing => self.text.push_str("NA"),
            }
        }
        self.text.push('\n');
    }

    pub fn into_bytes(self) -> Vec<u8> {
        self.text.into_bytes()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn floats_carry_seventeen_digits() {
        let s = format_f64(0.1);
        assert_eq!(s, "1.0000000000000001e-1");
        assert_eq!(s.parse::<f64>().unwrap(), 0.1);
        let third = 1.0 / 3.0;
        assert_eq!(format_f64(third).parse::<f64>().unwrap(), third);
    }

    #[test]
    fn json_uses_fixed_float_form() {
        #[derive(Serialize)]
        struct Doc {
            x: f64,
            xs: Vec<f64>,
            k: u64,
        }
        let text = String::from_utf8(to_report_json(&Doc {
            x: 0.5,
            xs: vec![1.0, 2.5e-10],
            k: 3,
        }))
        .unwrap();
        assert!(text.contains("\"x\": 5.0000000000000000e-1"), "{text}");
        assert!(text.contains("2.5000000000000002e-10"), "{text}");
        let back: serde_json::Value = serde_json::from_str(&text).unwrap();
        assert_eq!(back["k"], 3);
        assert_eq!(back["xs"][1].as_f64().unwrap(), 2.5e-10);
    }

    #[test]
    fn table_layout() {
        let mut t = Table::new(TableFormat::Csv, "simulate", 7, &["n", "Z", "note"]);
        t.row(vec![1u64.into(), 0.25.into(), Cell::Missing]);
        let text = String::from_utf8(t.into_bytes()).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], format!("# hrru {VERSION} kind=simulate seed=7"));
        assert_eq!(lines[1], "n,Z,note");
        assert_eq!(lines[2], "1,2.5000000000000000e-1,NA");
    }
}
