//! Deterministic CSV assembly. Floats are written in Rust's shortest
//! round-trip form, so parsing a value back yields the exact bits that
//! produced it and identical runs produce identical bytes.

use std::fs;
use std::io;
use std::path::Path;

pub fn format_f64(value: f64) -> String {
    format!("{value}")
}

/// Formats an optional value, writing the empty string for `None`.
pub fn format_opt_f64(value: Option<f64>) -> String {
    value.map(format_f64).unwrap_or_default()
}

pub struct Table {
    columns: usize,
    body: String,
}

impl Table {
    pub fn new(header: &[&str]) -> Self {
        let mut body = header.join(",");
        body.push('\n');
        Table {
            columns: header.len(),
            body,
        }
    }

    pub fn row(&mut self, cells: &[String]) {
        assert_eq!(cells.len(), self.columns, "row width mismatch");
        self.body.push_str(&cells.join(","));
        self.body.push('\n');
    }

    pub fn write_to(&self, path: &Path) -> io::Result<()> {
        if let Some(parent) = path.parent() {
            if !parent.as_os_str().is_empty() {
                fs::create_dir_all(parent)?;
            }
        }
        fs::write(path, &self.body)
    }
}
