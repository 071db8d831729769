//! CSV tables in, CSV and JSON artifacts out.
//!
//! Every artifact starts with `#` comment lines carrying the tool version and
//! the resolved run configuration; readers skip them.

use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::error::{LabError, Result};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// Shortest round-trip decimal, switching to exponent form for very small or
/// large magnitudes.
pub fn fmt_f64(v: f64) -> String {
    let a = v.abs();
    if a != 0.0 && a.is_finite() && !(1e-5..1e16).contains(&a) {
        format!("{v:e}")
    } else {
        format!("{v}")
    }
}

/// The comment lines that open every artifact.
pub fn header_lines(config: &impl Serialize) -> Vec<String> {
    let json = serde_json::to_string(config).expect("run configurations serialize");
    vec![
        format!("# frontier-lab {VERSION} (frontier-core {})", frontier_core::VERSION),
        format!("# config: {json}"),
    ]
}

/// A CSV file held in memory as strings.
#[derive(Debug, Clone)]
pub struct Table {
    pub path: PathBuf,
    pub headers: Vec<String>,
    pub rows: Vec<Vec<String>>,
    /// Line of each row in the file, for messages.
    pub lines: Vec<u64>,
}

impl Table {
    pub fn read(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| LabError::io(path, e))?;
        let schema = |message: String| LabError::Schema {
            path: path.to_path_buf(),
            message,
        };
        let mut reader = csv::ReaderBuilder::new()
            .comment(Some(b'#'))
            .trim(csv::Trim::All)
            .from_reader(text.as_bytes());
        let headers: Vec<String> = reader
            .headers()
            .map_err(|e| schema(format!("cannot read header row: {e}")))?
            .iter()
            .map(str::to_owned)
            .collect();
        if headers.is_empty() || headers.iter().all(String::is_empty) {
            return Err(schema("missing header row".into()));
        }
        let mut rows = Vec::new();
        let mut lines = Vec::new();
        for record in reader.records() {
            let record = record.map_err(|e| schema(e.to_string()))?;
            lines.push(record.position().map_or(0, |p| p.line()));
            rows.push(record.iter().map(str::to_owned).collect());
        }
        Ok(Self {
            path: path.to_path_buf(),
            headers,
            rows,
            lines,
        })
    }

    pub fn column_index(&self, name: &str) -> Result<usize> {
        self.headers.iter().position(|h| h == name).ok_or_else(|| LabError::Schema {
            path: self.path.clone(),
            message: format!("column '{name}' not found; columns are: {}", self.headers.join(", ")),
        })
    }

    /// Finite numeric values of column `name`.
    pub fn numeric_column(&self, name: &str) -> Result<Vec<f64>> {
        let j = self.column_index(name)?;
        self.rows
            .iter()
            .zip(&self.lines)
            .map(|(row, line)| {
                let cell = row.get(j).map_or("", String::as_str);
                match cell.parse::<f64>() {
                    Ok(v) if v.is_finite() => Ok(v),
                    _ => Err(LabError::Schema {
                        path: self.path.clone(),
                        message: format!("line {line}, column '{name}': '{cell}' is not a finite number"),
                    }),
                }
            })
            .collect()
    }
}

/// Renders `header` comment lines, a column header and rows as CSV text.
pub fn render_csv(header: &[String], columns: &[&str], rows: &[Vec<String>]) -> String {
    let mut out = String::new();
    for line in header {
        out.push_str(line);
        out.push('\n');
    }
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(columns).expect("writing to memory");
    for row in rows {
        w.write_record(row).expect("writing to memory");
    }
    out.push_str(&String::from_utf8(w.into_inner().expect("writing to memory")).expect("CSV of UTF-8 fields"));
    out
}

/// Files written by one command. Unless [`Outputs::commit`] is called they are
/// removed again when the set is dropped, so an aborted run leaves nothing
/// half-written behind.
#[derive(Debug, Default)]
pub struct Outputs {
    written: Vec<PathBuf>,
    committed: bool,
}

impl Outputs {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn write(&mut self, path: &Path, contents: &str) -> Result<()> {
        self.written.push(path.to_path_buf());
        fs::write(path, contents).map_err(|e| LabError::io(path, e))
    }

    pub fn paths(&self) -> &[PathBuf] {
        &self.written
    }

    pub fn commit(mut self) -> Vec<PathBuf> {
        self.committed = true;
        std::mem::take(&mut self.written)
    }
}

impl Drop for Outputs {
    fn drop(&mut self) {
        if !self.committed {
            for p in &self.written {
                let _ = fs::remove_file(p);
            }
        }
    }
}

/// Fails unless the directory that will hold `path` exists.
pub fn check_parent(path: &Path) -> Result<()> {
    let parent = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => return Ok(()),
    };
    if parent.is_dir() {
        Ok(())
    } else {
        Err(LabError::io(
            parent,
            std::io::Error::new(std::io::ErrorKind::NotFound, "output directory does not exist"),
        ))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn number_format_round_trips() {
        for v in [0.0, 1.0, -2.5, 1e-7, 3.0e20, 0.1 + 0.2, f64::MIN_POSITIVE] {
            assert_eq!(fmt_f64(v).parse::<f64>().unwrap(), v);
        }
        assert_eq!(fmt_f64(1.0), "1");
        assert_eq!(fmt_f64(1e-7), "1e-7");
    }

    #[test]
    fn uncommitted_outputs_are_removed() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("a.csv");
        {
            let mut out = Outputs::new();
            out.write(&path, "x\n1\n").unwrap();
            assert!(path.exists());
        }
        assert!(!path.exists());
        let mut out = Outputs::new();
        out.write(&path, "x\n1\n").unwrap();
        out.commit();
        assert!(path.exists());
    }

    #[test]
    fn reading_skips_comments_and_reports_lines() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.csv");
        fs::write(&path, "# note\ny,x\n1,2\nNaN,3\n").unwrap();
        let t = Table::read(&path).unwrap();
        assert_eq!(t.headers, ["y", "x"]);
        assert_eq!(t.numeric_column("x").unwrap(), [2.0, 3.0]);
        let err = t.numeric_column("y").unwrap_err().to_string();
        assert!(err.contains("line 4") && err.contains("'y'"), "{err}");
        assert!(t.numeric_column("z").unwrap_err().to_string().contains("'z' not found"));
    }
}
