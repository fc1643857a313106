//! Artifact writing: LF-terminated CSV and pretty JSON summaries.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::error::{Error, Result};
use crate::harness::config::RunConfig;

/// In-memory CSV document with a fixed header.
#[derive(Debug, Clone)]
pub struct Csv {
    columns: usize,
    text: String,
}

impl Csv {
    pub fn new(header: &[&str]) -> Self {
        let mut text = header.join(",");
        text.push('\n');
        Self { columns: header.len(), text }
    }

    /// Appends one row; every cell is rendered with `Display`.
    pub fn row(&mut self, cells: &[&dyn std::fmt::Display]) {
        debug_assert_eq!(cells.len(), self.columns, "row width");
        for (i, c) in cells.iter().enumerate() {
            if i > 0 {
                self.text.push(',');
            }
            write!(self.text, "{c}").expect("writing to a String");
        }
        self.text.push('\n');
    }

    pub fn as_str(&self) -> &str {
        &self.text
    }
}

/// Summary document shared by every command.
#[derive(Debug, Serialize)]
struct Summary<'a, T: Serialize> {
    command: &'a str,
    seed: u64,
    config_hash: String,
    results: &'a T,
}

/// Output directory plus the list of files written so far.
#[derive(Debug)]
pub struct ArtifactSink {
    dir: PathBuf,
    pub written: Vec<PathBuf>,
}

impl ArtifactSink {
    pub fn create(dir: &Path) -> Result<Self> {
        fs::create_dir_all(dir)?;
        Ok(Self { dir: dir.to_path_buf(), written: Vec::new() })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn write_bytes(&mut self, name: &str, bytes: &[u8]) -> Result<PathBuf> {
        let path = self.dir.join(name);
        fs::write(&path, bytes)?;
        self.written.push(path.clone());
        Ok(path)
    }

    pub fn write_csv(&mut self, name: &str, csv: &Csv) -> Result<PathBuf> {
        self.write_bytes(name, csv.as_str().as_bytes())
    }

    pub fn write_summary<T: Serialize>(&mut self, command: &str, cfg: &RunConfig, results: &T) -> Result<PathBuf> {
        let summary = Summary { command, seed: cfg.seed, config_hash: cfg.hash()?, results };
        let mut text = serde_json::to_string_pretty(&summary).map_err(|e| Error::Serde(e.to_string()))?;
        text.push('\n');
        self.write_bytes(&format!("{command}_summary.json"), text.as_bytes())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_dialect() {
        let mut c = Csv::new(&["a", "b"]);
        c.row(&[&1, &0.25]);
        c.row(&[&"x", &-1.5e-7]);
        assert_eq!(c.as_str(), "a,b\n1,0.25\nx,-0.00000015\n");
    }
}
