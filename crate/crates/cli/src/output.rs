//! File emission. Every file written goes through [`OutputDir`] so the
//! manifest can list it with its checksum.

use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, serde::Deserialize)]
pub struct EmittedFile {
    pub path: String,
    pub sha256: String,
    pub bytes: u64,
}

pub struct OutputDir {
    root: PathBuf,
    files: Vec<EmittedFile>,
}

impl OutputDir {
    pub fn create(root: &Path) -> CliResult<Self> {
        fs::create_dir_all(root).map_err(|e| CliError::io(root, e))?;
        Ok(OutputDir { root: root.to_path_buf(), files: Vec::new() })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn files(&self) -> &[EmittedFile] {
        &self.files
    }

    pub fn write_bytes(&mut self, name: &str, data: &[u8]) -> CliResult<()> {
        let path = self.root.join(name);
        fs::write(&path, data).map_err(|e| CliError::io(&path, e))?;
        self.files.retain(|f| f.path != name);
        self.files.push(EmittedFile { path: name.to_string(), sha256: sha256_hex(data), bytes: data.len() as u64 });
        Ok(())
    }

    pub fn write_json<T: Serialize>(&mut self, name: &str, value: &T) -> CliResult<()> {
        let mut s = serde_json::to_string_pretty(value).expect("report serializes");
        s.push('\n');
        self.write_bytes(name, s.as_bytes())
    }

    pub fn write_csv(&mut self, name: &str, table: &CsvTable) -> CliResult<()> {
        self.write_bytes(name, table.render().as_bytes())
    }
}

pub fn sha256_hex(data: &[u8]) -> String {
    hex::encode(Sha256::digest(data))
}

/// CSV with optional `# key = value` metadata lines before the header row.
#[derive(Debug, Clone, Default)]
pub struct CsvTable {
    meta: Vec<(String, String)>,
    header: Vec<String>,
    rows: Vec<Vec<String>>,
}

impl CsvTable {
    pub fn new(header: &[&str]) -> Self {
        CsvTable { meta: Vec::new(), header: header.iter().map(|s| s.to_string()).collect(), rows: Vec::new() }
    }

    pub fn meta(mut self, key: &str, value: impl ToString) -> Self {
        self.meta.push((key.to_string(), value.to_string()));
        self
    }

    pub fn row(&mut self, cells: Vec<String>) {
        debug_assert_eq!(cells.len(), self.header.len());
        self.rows.push(cells);
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn render(&self) -> String {
        let mut out = String::new();
        for (k, v) in &self.meta {
            out.push_str(&format!("# {k} = {v}\n"));
        }
        let mut w = csv::WriterBuilder::new().from_writer(Vec::new());
        w.write_record(&self.header).expect("in-memory write");
        for r in &self.rows {
            w.write_record(r).expect("in-memory write");
        }
        out.push_str(&String::from_utf8(w.into_inner().expect("flush")).expect("utf8"));
        out
    }
}

/// Shortest round-trip float formatting; deterministic across runs.
pub fn num(v: f64) -> String {
    format!("{v}")
}
