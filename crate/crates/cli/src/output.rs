//! CSV tables and atomic file writes.
//!
//! Floats are written in their shortest round-trip form, so reading a value
//! back yields the identical `f64`.

use std::fmt::Write as _;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use spde_bridge_core::PhysicalGrid;

use crate::error::{CliError, Result};

pub fn fmt_f64(v: f64) -> String {
    format!("{v:?}")
}

/// `t, c_1, ..., c_J`.
pub fn path_header(modes: usize) -> Vec<String> {
    prefixed("t", "c", modes)
}

/// `t, u_1, ..., u_M`.
pub fn field_header(points: usize) -> Vec<String> {
    prefixed("t", "u", points)
}

pub fn prefixed(first: &str, stem: &str, count: usize) -> Vec<String> {
    std::iter::once(first.to_string())
        .chain((1..=count).map(|i| format!("{stem}_{i}")))
        .collect()
}

/// In-memory CSV table, written out in one atomic step.
#[derive(Debug, Clone)]
pub struct Table {
    width: usize,
    text: String,
}

impl Table {
    pub fn new<S: AsRef<str>>(header: &[S]) -> Self {
        let mut text = String::new();
        for (i, h) in header.iter().enumerate() {
            if i > 0 {
                text.push(',');
            }
            text.push_str(h.as_ref());
        }
        text.push('\n');
        Table {
            width: header.len(),
            text,
        }
    }

    /// A row of a leading label followed by floats.
    pub fn row(&mut self, label: &str, values: &[f64]) {
        debug_assert_eq!(values.len() + 1, self.width);
        self.text.push_str(label);
        for v in values {
            let _ = write!(self.text, ",{v:?}");
        }
        self.text.push('\n');
    }

    pub fn float_row(&mut self, lead: f64, values: &[f64]) {
        self.row(&fmt_f64(lead), values);
    }

    pub fn raw_row<S: AsRef<str>>(&mut self, cells: &[S]) {
        debug_assert_eq!(cells.len(), self.width);
        for (i, c) in cells.iter().enumerate() {
            if i > 0 {
                self.text.push(',');
            }
            self.text.push_str(c.as_ref());
        }
        self.text.push('\n');
    }

    pub fn as_str(&self) -> &str {
        &self.text
    }
}

/// Output directory; every file lands via write-temp-then-rename.
#[derive(Debug, Clone)]
pub struct OutputDir {
    root: PathBuf,
    written: Vec<String>,
}

impl OutputDir {
    pub fn create(root: &Path) -> Result<Self> {
        std::fs::create_dir_all(root).map_err(|e| CliError::io(root, e))?;
        Ok(OutputDir {
            root: root.to_path_buf(),
            written: Vec::new(),
        })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    /// Relative names of the files written so far, in order.
    pub fn written(&self) -> &[String] {
        &self.written
    }

    pub fn write(&mut self, name: &str, contents: &[u8]) -> Result<()> {
        let target = self.root.join(name);
        let dir = target.parent().unwrap_or(&self.root).to_path_buf();
        std::fs::create_dir_all(&dir).map_err(|e| CliError::io(&dir, e))?;
        let mut tmp = tempfile::NamedTempFile::new_in(&dir).map_err(|e| CliError::io(&dir, e))?;
        tmp.write_all(contents).map_err(|e| CliError::io(&target, e))?;
        tmp.persist(&target).map_err(|e| CliError::io(&target, e.error))?;
        self.written.push(name.to_string());
        Ok(())
    }

    pub fn write_table(&mut self, name: &str, table: &Table) -> Result<()> {
        self.write(name, table.as_str().as_bytes())
    }

    /// JSON with a trailing newline.
    pub fn write_json(&mut self, name: &str, value: &serde_json::Value) -> Result<()> {
        let mut s = serde_json::to_string_pretty(value).expect("JSON values always serialise");
        s.push('\n');
        self.write(name, s.as_bytes())
    }
}

/// Spectral path table: one row per time node.
pub fn path_table<'a>(times: impl Iterator<Item = f64>, states: impl Iterator<Item = &'a [f64]>, modes: usize) -> Table {
    let mut t = Table::new(&path_header(modes));
    for (time, x) in times.zip(states) {
        t.float_row(time, x);
    }
    t
}

/// Physical-space field table synthesised from spectral states.
pub fn field_table<'a>(
    times: impl Iterator<Item = f64>,
    states: impl Iterator<Item = &'a [f64]>,
    grid: &PhysicalGrid,
) -> Table {
    let mut t = Table::new(&field_header(grid.len()));
    let mut u = vec![0.0; grid.len()];
    for (time, x) in times.zip(states) {
        grid.to_physical_into(x, &mut u);
        t.float_row(time, &u);
    }
    t
}

/// `m, xi`: the interior grid points.
pub fn grid_table(grid: &PhysicalGrid) -> Table {
    let mut t = Table::new(&["m", "xi"]);
    for (m, xi) in grid.points().iter().enumerate() {
        t.row(&(m + 1).to_string(), &[*xi]);
    }
    t
}

/// Header and float rows of a CSV file. `key` names the config entry that
/// referenced the file, for error messages.
pub fn read_table(path: &Path, key: &str) -> Result<(Vec<String>, Vec<Vec<f64>>)> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| CliError::config(format!("`{key}`: cannot read {}: {e}", path.display())))?;
    let header: Vec<String> = rdr
        .headers()
        .map_err(|e| CliError::config(format!("`{key}`: {e}")))?
        .iter()
        .map(str::to_string)
        .collect();
    let mut rows = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| CliError::config(format!("`{key}`: {e}")))?;
        let row = rec
            .iter()
            .map(|cell| {
                cell.parse::<f64>().map_err(|_| {
                    CliError::config(format!("`{key}`: row {} has a non-numeric cell `{cell}`", i + 1))
                })
            })
            .collect::<Result<Vec<f64>>>()?;
        rows.push(row);
    }
    Ok((header, rows))
}

pub fn read_rows(path: &Path, key: &str) -> Result<Vec<Vec<f64>>> {
    read_table(path, key).map(|(_, rows)| rows)
}
