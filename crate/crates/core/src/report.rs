//! CSV output helpers: UTF-8, `\n` line endings, `.` decimal separator,
//! one header row. Formatting is deterministic, so identical inputs give
//! byte-identical files.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::error::Result;

#[derive(Debug, Clone)]
pub struct CsvTable {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl CsvTable {
    pub fn new(header: &[&str]) -> Self {
        CsvTable {
            header: header.iter().map(|s| s.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn push_f64(&mut self, values: &[f64]) {
        self.push(values.iter().map(|v| fmt_f64(*v)).collect());
    }

    pub fn to_string(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "{}", self.header.join(","));
        for row in &self.rows {
            let _ = writeln!(out, "{}", row.join(","));
        }
        out
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        if let Some(parent) = path.parent() {
            if !parent.as_os_str().is_empty() {
                fs::create_dir_all(parent)?;
            }
        }
        fs::write(path, self.to_string())?;
        Ok(())
    }
}

/// Shortest round-trip representation; stable across runs of one build.
pub fn fmt_f64(v: f64) -> String {
    if v == 0.0 {
        "0".into()
    } else {
        format!("{v}")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_layout() {
        let mut t = CsvTable::new(&["omega_hz", "S"]);
        t.push_f64(&[1.0, 2.5e-3]);
        t.push_f64(&[2.0, 0.0]);
        let s = t.to_string();
        assert_eq!(s, "omega_hz,S\n1,0.0025\n2,0\n");
    }

    #[test]
    fn deterministic_formatting() {
        let a = fmt_f64(1.0 / 3.0);
        let b = fmt_f64(1.0 / 3.0);
        assert_eq!(a, b);
        assert_eq!(fmt_f64(-0.0), "0");
    }
}
