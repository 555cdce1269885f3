//! Function files and report output.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::Context;
use bilinear_lab::{Complex64, SampledFunction, Side, TorusGrid};
use serde::{Deserialize, Serialize};
use serde_json::Value;

/// On-disk form of a sampled function: real and imaginary parts in storage
/// order of the centered grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FunctionFile {
    pub dim: usize,
    pub length: f64,
    pub points: usize,
    pub side: Side,
    pub re: Vec<f64>,
    pub im: Vec<f64>,
}

impl FunctionFile {
    pub fn from_function(f: &SampledFunction) -> Self {
        let g = f.grid();
        FunctionFile {
            dim: g.dim(),
            length: g.length(),
            points: g.points(),
            side: f.side(),
            re: f.values().iter().map(|v| v.re).collect(),
            im: f.values().iter().map(|v| v.im).collect(),
        }
    }

    pub fn to_function(&self) -> bilinear_lab::Result<SampledFunction> {
        if self.re.len() != self.im.len() {
            return Err(bilinear_lab::LabError::Dimension(format!(
                "re has {} entries, im has {}",
                self.re.len(),
                self.im.len()
            )));
        }
        let grid = TorusGrid::new(self.dim, self.length, self.points)?;
        let values = self.re.iter().zip(&self.im).map(|(a, b)| Complex64::new(*a, *b)).collect();
        SampledFunction::new(grid, values, self.side)
    }
}

pub fn read_function(path: &Path) -> anyhow::Result<FunctionFile> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("parsing function file {}", path.display()))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> anyhow::Result<()> {
    let text = serde_json::to_string_pretty(value)?;
    fs::write(path, text + "\n").with_context(|| format!("writing {}", path.display()))
}

#[derive(Debug, Serialize)]
pub struct Report {
    pub command: String,
    pub params: Value,
    pub results: Value,
    /// wall-clock seconds per phase
    pub timings: BTreeMap<String, f64>,
    pub seed: u64,
}

/// Where a run puts its files: `<dir>/<stem>.json` and `<dir>/<stem>.csv`.
pub struct Sink {
    pub dir: PathBuf,
    pub stem: String,
    pub json: bool,
    pub csv: bool,
}

impl Sink {
    pub fn path(&self, ext: &str) -> PathBuf {
        self.dir.join(format!("{}.{ext}", self.stem))
    }

    pub fn prepare(&self) -> anyhow::Result<()> {
        fs::create_dir_all(&self.dir).with_context(|| format!("creating {}", self.dir.display()))
    }

    /// Writes the report and the optional table; returns the paths written.
    pub fn emit(&self, report: &Report, table: Option<Table>) -> anyhow::Result<Vec<PathBuf>> {
        let mut written = Vec::new();
        if self.json {
            let p = self.path("json");
            write_json(&p, report)?;
            written.push(p);
        }
        if let (true, Some(t)) = (self.csv, table) {
            let p = self.path("csv");
            let mut w = csv::Writer::from_path(&p).with_context(|| format!("writing {}", p.display()))?;
            w.write_record(&t.header)?;
            for row in &t.rows {
                w.write_record(row)?;
            }
            w.flush()?;
            written.push(p);
        }
        Ok(written)
    }
}

pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(header: &[&str]) -> Self {
        Table {
            header: header.iter().map(|s| s.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    /// Parses a CSV text with a header line.
    pub fn from_csv(text: &str) -> anyhow::Result<Self> {
        let mut r = csv::Reader::from_reader(text.as_bytes());
        let header = r.headers()?.iter().map(String::from).collect();
        let rows = r
            .records()
            .map(|rec| rec.map(|rec| rec.iter().map(String::from).collect()))
            .collect::<Result<_, _>>()?;
        Ok(Table { header, rows })
    }
}
