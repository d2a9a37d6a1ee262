//! Atomic report writers.

use std::fmt::Write as _;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::CliError;

/// Writes `bytes` to `dir/name` through a temporary file in the same
/// directory followed by a rename.
pub fn write_atomic(dir: &Path, name: &str, bytes: &[u8]) -> Result<PathBuf, CliError> {
    std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    let path = dir.join(name);
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| CliError::io(dir, e))?;
    tmp.write_all(bytes).map_err(|e| CliError::io(&path, e))?;
    tmp.as_file().sync_all().map_err(|e| CliError::io(&path, e))?;
    tmp.persist(&path).map_err(|e| CliError::io(&path, e.error))?;
    log::info!("wrote {}", path.display());
    Ok(path)
}

/// Pretty JSON with a trailing newline. Floats use the shortest
/// representation that parses back to the same double.
pub fn to_json<T: Serialize>(value: &T) -> Result<Vec<u8>, CliError> {
    let mut v = serde_json::to_vec_pretty(value).map_err(|e| CliError::Numerical(e.to_string()))?;
    v.push(b'\n');
    Ok(v)
}

pub fn write_json<T: Serialize>(dir: &Path, name: &str, value: &T) -> Result<PathBuf, CliError> {
    write_atomic(dir, name, &to_json(value)?)
}

/// A CSV table of numbers and short identifiers.
#[derive(Debug, Clone, Default)]
pub struct Table {
    header: Vec<String>,
    body: String,
}

impl Table {
    pub fn new<S: AsRef<str>>(header: &[S]) -> Self {
        Self {
            header: header.iter().map(|s| s.as_ref().to_string()).collect(),
            body: String::new(),
        }
    }

    pub fn row(&mut self, cells: &[Cell]) {
        debug_assert_eq!(cells.len(), self.header.len());
        for (i, c) in cells.iter().enumerate() {
            if i > 0 {
                self.body.push(',');
            }
            match c {
                Cell::F(x) if x.is_finite() => write!(self.body, "{x:?}").unwrap(),
                Cell::F(_) | Cell::Empty => {}
                Cell::U(x) => write!(self.body, "{x}").unwrap(),
            }
        }
        self.body.push('\n');
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut s = self.header.join(",");
        s.push('\n');
        s.push_str(&self.body);
        s.into_bytes()
    }
}

#[derive(Debug, Clone, Copy)]
pub enum Cell {
    F(f64),
    U(u64),
    Empty,
}

impl From<f64> for Cell {
    fn from(x: f64) -> Self {
        Cell::F(x)
    }
}

impl From<Option<f64>> for Cell {
    fn from(x: Option<f64>) -> Self {
        x.map_or(Cell::Empty, Cell::F)
    }
}

impl From<u64> for Cell {
    fn from(x: u64) -> Self {
        Cell::U(x)
    }
}

impl From<usize> for Cell {
    fn from(x: usize) -> Self {
        Cell::U(x as u64)
    }
}

/// Run metadata kept apart from the reports so that the latter are
/// reproducible byte for byte.
#[derive(Debug, Serialize)]
pub struct Metadata {
    pub command: String,
    pub version: &'static str,
    pub unix_time: u64,
    pub elapsed_seconds: f64,
    pub threads: usize,
    pub files: Vec<String>,
    pub exit_code: u8,
}
