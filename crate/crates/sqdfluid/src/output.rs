//! CSV tables. Every file has a header row; numbers use Rust's shortest
//! round-trip formatting, so identical runs give identical bytes.

use std::path::{Path, PathBuf};

use crate::Error;

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new<S: AsRef<str>>(header: &[S]) -> Self {
        Self { header: header.iter().map(|s| s.as_ref().to_string()).collect(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>, Error> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(&self.header)?;
        for r in &self.rows {
            w.write_record(r)?;
        }
        w.into_inner().map_err(|e| Error::Io(e.to_string()))
    }

    pub fn write(&self, path: &Path) -> Result<(), Error> {
        std::fs::write(path, self.to_bytes()?).map_err(|e| Error::Io(format!("{}: {e}", path.display())))
    }
}

pub fn num(x: f64) -> String {
    format!("{x}")
}

/// Empty cell for a missing value.
pub fn opt(x: Option<f64>) -> String {
    x.map(num).unwrap_or_default()
}

/// Named tables produced by one command.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Outputs {
    pub tables: Vec<(String, Table)>,
}

impl Outputs {
    pub fn add(&mut self, name: &str, table: Table) {
        self.tables.push((name.to_string(), table));
    }

    pub fn get(&self, name: &str) -> Option<&Table> {
        self.tables.iter().find(|(n, _)| n == name).map(|(_, t)| t)
    }

    /// Writes every table to `dir/<name>.csv`, creating `dir` if needed.
    pub fn write_all(&self, dir: &Path) -> Result<Vec<PathBuf>, Error> {
        std::fs::create_dir_all(dir).map_err(|e| Error::Io(format!("{}: {e}", dir.display())))?;
        let mut paths = Vec::new();
        for (name, t) in &self.tables {
            let p = dir.join(format!("{name}.csv"));
            t.write(&p)?;
            paths.push(p);
        }
        Ok(paths)
    }
}
