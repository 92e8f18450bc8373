//! Deterministic CSV output: LF line endings, UTF-8, `.` decimals, fixed
//! scientific float formatting, a header row, and a trailing comment with
//! the scenario digest. Files are written to a temp path in the target
//! directory and renamed into place.

use std::fmt::Write as _;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};

pub enum Cell {
    Text(String),
    Num(f64),
    Int(i64),
    Flag(bool),
}

impl From<f64> for Cell {
    fn from(v: f64) -> Self {
        Cell::Num(v)
    }
}

impl From<&str> for Cell {
    fn from(v: &str) -> Self {
        Cell::Text(v.to_string())
    }
}

impl From<bool> for Cell {
    fn from(v: bool) -> Self {
        Cell::Flag(v)
    }
}

impl From<i64> for Cell {
    fn from(v: i64) -> Self {
        Cell::Int(v)
    }
}

pub struct Table {
    header: Vec<String>,
    rows: Vec<Vec<Cell>>,
}

impl Table {
    pub fn new(header: &[&str]) -> Self {
        Table {
            header: header.iter().map(|s| s.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        assert_eq!(row.len(), self.header.len(), "row width mismatch");
        self.rows.push(row);
    }

    fn render(&self, digest: &str) -> String {
        let mut out = String::new();
        out.push_str(&self.header.join(","));
        out.push('\n');
        for row in &self.rows {
            let mut first = true;
            for cell in row {
                if !first {
                    out.push(',');
                }
                first = false;
                match cell {
                    Cell::Text(s) => out.push_str(s),
                    Cell::Num(v) => {
                        let _ = write!(out, "{v:.17e}");
                    }
                    Cell::Int(v) => {
                        let _ = write!(out, "{v}");
                    }
                    Cell::Flag(v) => out.push_str(if *v { "true" } else { "false" }),
                }
            }
            out.push('\n');
        }
        let _ = writeln!(out, "# scenario_digest={digest}");
        out
    }

    /// Atomic write: temp file in the same directory, then rename.
    pub fn write(&self, dir: &Path, name: &str, digest: &str) -> Result<PathBuf> {
        std::fs::create_dir_all(dir)
            .with_context(|| format!("cannot create output dir {}", dir.display()))?;
        let final_path = dir.join(name);
        let tmp_path = dir.join(format!(".{name}.tmp"));
        {
            let mut f = std::fs::File::create(&tmp_path)
                .with_context(|| format!("cannot create {}", tmp_path.display()))?;
            f.write_all(self.render(digest).as_bytes())?;
            f.sync_all()?;
        }
        std::fs::rename(&tmp_path, &final_path)
            .with_context(|| format!("cannot move into place {}", final_path.display()))?;
        Ok(final_path)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn render_is_deterministic() {
        let mut t = Table::new(&["a", "b"]);
        t.push(vec![Cell::Num(1.0 / 3.0), Cell::Flag(true)]);
        let one = t.render("abc");
        let two = t.render("abc");
        assert_eq!(one, two);
        assert!(one.ends_with("# scenario_digest=abc\n"));
        assert!(one.starts_with("a,b\n"));
    }
}
