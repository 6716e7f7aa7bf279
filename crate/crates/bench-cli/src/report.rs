//! Run reports, the append-only results table and long-format plot files.

use std::fmt::Write as _;
use std::fs::{self, OpenOptions};
use std::io::Write;
use std::path::Path;

use crate::error::CliError;

pub const SCHEMA_VERSION: u32 = 1;
pub const COLUMNS: [&str; 10] =
    ["dataset", "method", "clusterer", "p", "alpha", "ll_valid_mean", "ll_test_mean", "ll_test_std", "nodes", "seconds"];

/// Outcome of one grid cell (or a single `learn` run with one repetition).
#[derive(Debug, Clone, PartialEq)]
pub struct RunReport {
    pub dataset: String,
    pub method: String,
    pub clusterer: String,
    pub p: f64,
    pub alpha: f64,
    pub ll_valid: Vec<f64>,
    pub ll_test: Vec<f64>,
    pub nodes: usize,
    pub edges: usize,
    pub params: usize,
    pub seconds: f64,
    pub seeds: Vec<u64>,
}

pub fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len().max(1) as f64
}

/// Population standard deviation; 0 for a single value.
pub fn std_dev(xs: &[f64]) -> f64 {
    let m = mean(xs);
    (xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / xs.len().max(1) as f64).sqrt()
}

impl RunReport {
    pub fn ll_valid_mean(&self) -> f64 {
        mean(&self.ll_valid)
    }

    pub fn ll_test_mean(&self) -> f64 {
        mean(&self.ll_test)
    }

    pub fn ll_test_std(&self) -> f64 {
        std_dev(&self.ll_test)
    }

    pub fn key(&self) -> CellKey {
        CellKey::new(&self.dataset, &self.method, &self.clusterer, self.p, self.alpha)
    }

    pub fn row(&self) -> String {
        format!(
            "{}\t{}\t{}\t{}\t{}\t{:.10}\t{:.10}\t{:.10}\t{}\t{:.3}",
            self.dataset,
            self.method,
            self.clusterer,
            self.p,
            self.alpha,
            self.ll_valid_mean(),
            self.ll_test_mean(),
            self.ll_test_std(),
            self.nodes,
            self.seconds
        )
    }

    /// Human-readable summary.
    pub fn summary(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "dataset      {}", self.dataset);
        let _ = writeln!(s, "method       {} ({})", self.method, self.clusterer);
        let _ = writeln!(s, "p, alpha     {}, {}", self.p, self.alpha);
        let _ = writeln!(s, "valid LL     {:.6}", self.ll_valid_mean());
        let _ = writeln!(s, "test LL      {:.6} ± {:.6} over {} rep(s)", self.ll_test_mean(), self.ll_test_std(), self.ll_test.len());
        let _ = writeln!(s, "size         {} nodes, {} edges, {} params", self.nodes, self.edges, self.params);
        let _ = writeln!(s, "seeds        {:?}", self.seeds);
        let _ = write!(s, "seconds      {:.3}", self.seconds);
        s
    }
}

/// Identifies a grid cell in the results table.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct CellKey(pub [String; 5]);

impl CellKey {
    pub fn new(dataset: &str, method: &str, clusterer: &str, p: f64, alpha: f64) -> Self {
        CellKey([dataset.to_string(), method.to_string(), clusterer.to_string(), p.to_string(), alpha.to_string()])
    }
}

pub fn header() -> String {
    format!("# schema_version={SCHEMA_VERSION}\n{}\n", COLUMNS.join("\t"))
}

/// Keys of the cells already recorded in a results file.
pub fn completed_cells(path: &Path) -> Result<Vec<CellKey>, CliError> {
    if !path.exists() {
        return Ok(Vec::new());
    }
    let text = fs::read_to_string(path)?;
    let mut lines = text.lines();
    match lines.next() {
        Some(l) if l.trim() == format!("# schema_version={SCHEMA_VERSION}") => {}
        other => {
            return Err(CliError::Data(format!(
                "{}: unsupported results header {:?}",
                path.display(),
                other.unwrap_or("")
            )))
        }
    }
    let mut keys = Vec::new();
    for line in lines.skip(1).filter(|l| !l.trim().is_empty()) {
        let f: Vec<&str> = line.split('\t').collect();
        if f.len() != COLUMNS.len() {
            return Err(CliError::Data(format!("{}: malformed row {line:?}", path.display())));
        }
        keys.push(CellKey([f[0], f[1], f[2], f[3], f[4]].map(String::from)));
    }
    Ok(keys)
}

/// Appends rows, writing the header first when the file is new.
pub fn append_rows(path: &Path, reports: &[RunReport]) -> Result<(), CliError> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)?;
    }
    let fresh = !path.exists() || fs::metadata(path)?.len() == 0;
    let mut f = OpenOptions::new().create(true).append(true).open(path)?;
    if fresh {
        f.write_all(header().as_bytes())?;
    }
    for r in reports {
        writeln!(f, "{}", r.row())?;
    }
    Ok(())
}

/// Drops the `seconds` column, which is the only column that legitimately
/// differs between otherwise identical runs.
pub fn without_timing(table: &str) -> String {
    table
        .lines()
        .map(|l| {
            if l.starts_with('#') {
                l.to_string()
            } else {
                let mut f: Vec<&str> = l.split('\t').collect();
                f.pop();
                f.join("\t")
            }
        })
        .collect::<Vec<_>>()
        .join("\n")
}

/// Long-format plot data.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct PlotData {
    pub points: Vec<(f64, f64, String)>,
}

impl PlotData {
    pub fn push(&mut self, x: f64, y: f64, series: impl Into<String>) {
        self.points.push((x, y, series.into()));
    }

    pub fn to_tsv(&self) -> String {
        let mut s = String::from("x\ty\tseries\n");
        for (x, y, series) in &self.points {
            let _ = writeln!(s, "{x}\t{y}\t{series}");
        }
        s
    }

    pub fn write(&self, path: &Path) -> Result<(), CliError> {
        if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
            fs::create_dir_all(dir)?;
        }
        fs::write(path, self.to_tsv())?;
        Ok(())
    }
}
