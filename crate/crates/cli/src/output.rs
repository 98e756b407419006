//! Tables, number formatting, atomic file output and the run manifest.

use std::io::Write;
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::Value;
use sha2::{Digest, Sha256};

use crate::error::CliError;

pub const UNITS: &str = "Gamma = 1 (intermediate-state decay rate), lambda = 1, c = 1; k = 2*pi, g^2/c = 3/(8*pi); angles in degrees";

/// `%.12g`: 12 significant digits, shortest of fixed and scientific.
pub fn fmt_num(x: f64) -> String {
    if x == 0.0 {
        return "0".into();
    }
    if !x.is_finite() {
        return if x.is_nan() { "nan".into() } else if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    let sci = format!("{:.11e}", x);
    let (mant, exp) = sci.split_once('e').expect("scientific format");
    let exp: i32 = exp.parse().expect("exponent");
    let trim = |s: &str| -> String {
        if s.contains('.') {
            s.trim_end_matches('0').trim_end_matches('.').to_string()
        } else {
            s.to_string()
        }
    };
    if !(-5..12).contains(&exp) {
        format!("{}e{}{:02}", trim(mant), if exp < 0 { '-' } else { '+' }, exp.abs())
    } else {
        trim(&format!("{:.*}", (11 - exp) as usize, x))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Cell {
    Num(f64),
    Int(i64),
    Text(String),
}

impl Cell {
    fn render(&self) -> String {
        match self {
            Cell::Num(x) => fmt_num(*x),
            Cell::Int(i) => i.to_string(),
            Cell::Text(s) => s.clone(),
        }
    }
}

impl From<f64> for Cell {
    fn from(x: f64) -> Self {
        Cell::Num(x)
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<Cell>>,
}

impl Table {
    pub fn new(header: &[&str]) -> Self {
        Table { header: header.iter().map(|s| s.to_string()).collect(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn push_nums(&mut self, row: &[f64]) {
        self.push(row.iter().map(|&x| Cell::Num(x)).collect());
    }

    pub fn to_csv(&self) -> Vec<u8> {
        let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new());
        w.write_record(&self.header).expect("in-memory write");
        for r in &self.rows {
            w.write_record(r.iter().map(Cell::render)).expect("in-memory write");
        }
        w.into_inner().expect("in-memory flush")
    }
}

/// Ordered scalar results of one run.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Summary(pub Vec<(String, Value)>);

impl Summary {
    pub fn num(&mut self, key: &str, x: f64) {
        let v = if x.is_finite() { Value::from(x) } else { Value::String(fmt_num(x)) };
        self.0.push((key.into(), v));
    }

    pub fn int(&mut self, key: &str, x: i64) {
        self.0.push((key.into(), Value::from(x)));
    }

    pub fn text(&mut self, key: &str, s: impl Into<String>) {
        self.0.push((key.into(), Value::String(s.into())));
    }

    pub fn list(&mut self, key: &str, items: &[String]) {
        self.0.push((key.into(), Value::from(items.to_vec())));
    }

    pub fn get(&self, key: &str) -> Option<&Value> {
        self.0.iter().find(|(k, _)| k == key).map(|(_, v)| v)
    }

    /// Numeric value of a key written with `num`.
    pub fn get_f64(&self, key: &str) -> Option<f64> {
        match self.get(key)? {
            Value::String(s) => s.parse().ok(),
            Value::Number(n) => n.as_f64(),
            _ => None,
        }
    }

    pub fn to_json(&self) -> Vec<u8> {
        let map: serde_json::Map<String, Value> = self.0.iter().cloned().collect();
        let mut out = serde_json::to_vec_pretty(&Value::Object(map)).expect("json");
        out.push(b'\n');
        out
    }
}

/// Everything a command produces, before anything touches the disk.
#[derive(Clone, Debug, Default)]
pub struct Outcome {
    pub summary: Summary,
    pub tables: Vec<(String, Table)>,
    pub blobs: Vec<(String, Vec<u8>)>,
    pub warnings: Vec<String>,
}

#[derive(Clone, Debug, Serialize, PartialEq)]
pub struct FileEntry {
    pub path: String,
    pub sha256: String,
    pub bytes: u64,
}

#[derive(Clone, Debug, Serialize, PartialEq)]
pub struct PointFailure {
    pub axis_value: f64,
    pub exit_code: i32,
    pub error: String,
}

#[derive(Clone, Debug, Serialize)]
pub struct Manifest {
    pub tool: String,
    pub version: String,
    pub library_version: String,
    pub units: String,
    pub command: String,
    pub config_sha256: String,
    pub files: Vec<FileEntry>,
    pub failures: Vec<PointFailure>,
    pub warnings: Vec<String>,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

/// Writes files through a temporary sibling and a rename; records each in the manifest.
pub struct OutputDir {
    root: PathBuf,
    entries: Vec<FileEntry>,
}

impl OutputDir {
    pub fn create(root: &Path) -> Result<Self, CliError> {
        std::fs::create_dir_all(root).map_err(|e| CliError::io(root, e))?;
        Ok(OutputDir { root: root.to_path_buf(), entries: Vec::new() })
    }

    fn write_raw(&self, name: &str, bytes: &[u8]) -> Result<PathBuf, CliError> {
        let path = self.root.join(name);
        let mut tmp = tempfile::NamedTempFile::new_in(&self.root).map_err(|e| CliError::io(&self.root, e))?;
        tmp.write_all(bytes).map_err(|e| CliError::io(&path, e))?;
        tmp.as_file().sync_all().map_err(|e| CliError::io(&path, e))?;
        tmp.persist(&path).map_err(|e| CliError::io(&path, e.error))?;
        Ok(path)
    }

    pub fn write(&mut self, name: &str, bytes: &[u8]) -> Result<(), CliError> {
        if self.entries.iter().any(|e| e.path == name) {
            return Err(CliError::Config(format!("output {name} written twice")));
        }
        self.write_raw(name, bytes)?;
        self.entries.push(FileEntry { path: name.into(), sha256: sha256_hex(bytes), bytes: bytes.len() as u64 });
        Ok(())
    }

    pub fn write_outcome(&mut self, out: &Outcome) -> Result<(), CliError> {
        self.write("summary.json", &out.summary.to_json())?;
        for (name, t) in &out.tables {
            self.write(name, &t.to_csv())?;
        }
        for (name, b) in &out.blobs {
            self.write(name, b)?;
        }
        Ok(())
    }

    /// Writes manifest.json last; it is the only file not listed in itself.
    pub fn finish(mut self, mut manifest: Manifest) -> Result<Manifest, CliError> {
        manifest.files = std::mem::take(&mut self.entries);
        let mut bytes = serde_json::to_vec_pretty(&manifest).expect("json");
        bytes.push(b'\n');
        self.write_raw("manifest.json", &bytes)?;
        Ok(manifest)
    }
}
