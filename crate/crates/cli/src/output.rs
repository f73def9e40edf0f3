//! Text output formats.
//!
//! Tables are tab separated. Every table starts with three comment lines:
//!
//! ```text
//! # doublewell <kind>
//! # config-digest <sha256 of the canonical config>
//! # columns <name>\t<name>...
//! ```
//!
//! followed by one row per line. Numbers use the shortest decimal form that
//! parses back to the same `f64`, so files round-trip exactly.
//!
//! Density snapshots are square arrays with a one-line header
//!
//! ```text
//! # doublewell density t=<t> n=<points> x_min=<x> dx=<dx> config-digest=<hex>
//! ```
//!
//! and then `n` lines of `n` tab-separated values; row `i` is `x1 = x_min +
//! i dx`, column `j` is `x2`.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use sha2::{Digest, Sha256};

use crate::config::hex;
use crate::error::{CliError, Result};

pub struct Table {
    pub kind: String,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl Table {
    pub fn new(kind: &str, columns: &[&str]) -> Self {
        Self { kind: kind.into(), columns: columns.iter().map(|c| c.to_string()).collect(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<f64>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    pub fn render(&self, digest: &str) -> String {
        let mut s = format!("# doublewell {}\n# config-digest {digest}\n# columns {}\n", self.kind, self.columns.join("\t"));
        for row in &self.rows {
            let cells: Vec<String> = row.iter().map(|x| format!("{x}")).collect();
            s.push_str(&cells.join("\t"));
            s.push('\n');
        }
        s
    }
}

/// A parsed table file.
#[derive(Debug, PartialEq)]
pub struct ParsedTable {
    pub kind: String,
    pub digest: String,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

pub fn parse_table(text: &str) -> Result<ParsedTable> {
    let bad = |m: &str| CliError::Config(format!("malformed table: {m}"));
    let mut lines = text.lines();
    let kind = lines.next().and_then(|l| l.strip_prefix("# doublewell ")).ok_or_else(|| bad("kind"))?;
    let digest = lines.next().and_then(|l| l.strip_prefix("# config-digest ")).ok_or_else(|| bad("digest"))?;
    let columns: Vec<String> = lines
        .next()
        .and_then(|l| l.strip_prefix("# columns"))
        .ok_or_else(|| bad("columns"))?
        .split_whitespace()
        .map(String::from)
        .collect();
    let mut rows = Vec::new();
    for l in lines {
        let row: std::result::Result<Vec<f64>, _> = l.split('\t').map(str::parse).collect();
        let row = row.map_err(|_| bad("number"))?;
        if row.len() != columns.len() {
            return Err(bad("row width"));
        }
        rows.push(row);
    }
    Ok(ParsedTable { kind: kind.into(), digest: digest.into(), columns, rows })
}

pub struct Snapshot {
    pub t: f64,
    pub x_min: f64,
    pub dx: f64,
    /// Row-major `n x n` values.
    pub values: Vec<f64>,
    pub n: usize,
}

impl Snapshot {
    pub fn render(&self, digest: &str) -> String {
        let mut s = format!(
            "# doublewell density t={} n={} x_min={} dx={} config-digest={digest}\n",
            self.t, self.n, self.x_min, self.dx
        );
        for i in 0..self.n {
            let cells: Vec<String> = self.values[i * self.n..(i + 1) * self.n].iter().map(|x| format!("{x}")).collect();
            s.push_str(&cells.join("\t"));
            s.push('\n');
        }
        s
    }

    pub fn parse(text: &str) -> Result<Self> {
        let bad = |m: &str| CliError::Config(format!("malformed snapshot: {m}"));
        let mut lines = text.lines();
        let header = lines.next().and_then(|l| l.strip_prefix("# doublewell density ")).ok_or_else(|| bad("header"))?;
        let field = |key: &str| -> Result<String> {
            header
                .split_whitespace()
                .find_map(|kv| kv.strip_prefix(key).and_then(|v| v.strip_prefix('=')))
                .map(String::from)
                .ok_or_else(|| bad(key))
        };
        let num = |key: &str| -> Result<f64> { field(key)?.parse().map_err(|_| bad(key)) };
        let n: usize = field("n")?.parse().map_err(|_| bad("n"))?;
        let mut values = Vec::with_capacity(n * n);
        for l in lines {
            for v in l.split('\t') {
                values.push(v.parse().map_err(|_| bad("number"))?);
            }
        }
        if values.len() != n * n {
            return Err(bad("size"));
        }
        Ok(Self { t: num("t")?, x_min: num("x_min")?, dx: num("dx")?, values, n })
    }
}

/// A written file with its digest, relative to the output directory.
#[derive(Clone, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct FileEntry {
    pub path: String,
    pub sha256: String,
    pub bytes: usize,
}

/// Writes files into one output directory and keeps the inventory.
pub struct OutputDir {
    root: PathBuf,
    pub files: Vec<FileEntry>,
}

impl OutputDir {
    pub fn create(root: &Path) -> Result<Self> {
        fs::create_dir_all(root)?;
        Ok(Self { root: root.to_path_buf(), files: Vec::new() })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn write(&mut self, name: &str, content: &str) -> Result<()> {
        let mut f = fs::File::create(self.root.join(name))?;
        f.write_all(content.as_bytes())?;
        self.files.push(FileEntry {
            path: name.into(),
            sha256: hex(&Sha256::digest(content.as_bytes())),
            bytes: content.len(),
        });
        Ok(())
    }
}
