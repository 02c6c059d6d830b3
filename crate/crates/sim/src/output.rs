//! Deterministic CSV output, written once and renamed into place.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use crate::error::AppError;

/// Nine significant digits, scientific notation.
pub fn fmt_float(v: f64) -> String {
    format!("{v:.8e}")
}

/// Short label for a scan value: `54` or `27.5`.
pub fn label(v: f64) -> String {
    format!("{v}")
}

/// Writes `bytes` to `path` through a temporary sibling file.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), AppError> {
    let dir = path.parent().unwrap_or(Path::new("."));
    fs::create_dir_all(dir).map_err(|e| AppError::io(dir, e))?;
    let name = path.file_name().and_then(|n| n.to_str()).unwrap_or("out");
    let tmp = dir.join(format!(".{name}.tmp"));
    let mut f = fs::File::create(&tmp).map_err(|e| AppError::io(&tmp, e))?;
    f.write_all(bytes).map_err(|e| AppError::io(&tmp, e))?;
    f.sync_all().map_err(|e| AppError::io(&tmp, e))?;
    fs::rename(&tmp, path).map_err(|e| AppError::io(path, e))
}

/// A CSV table whose cells are pre-formatted strings.
pub struct Table {
    header: Vec<String>,
    rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(header: &[&str]) -> Self {
        Self {
            header: header.iter().map(|s| s.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push_floats(&mut self, row: &[f64]) {
        self.rows.push(row.iter().map(|v| fmt_float(*v)).collect());
    }

    pub fn push(&mut self, row: Vec<String>) {
        self.rows.push(row);
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn write(&self, path: &Path) -> Result<(), AppError> {
        let csv_err = |source| AppError::Csv {
            path: path.to_path_buf(),
            source,
        };
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(&self.header).map_err(csv_err)?;
        for r in &self.rows {
            w.write_record(r).map_err(csv_err)?;
        }
        let bytes = w.into_inner().map_err(|e| csv_err(e.into_error().into()))?;
        write_atomic(path, &bytes)
    }
}

/// Two-column table of `(x, y)` pairs.
pub fn series(header: [&str; 2], xs: &[f64], ys: &[f64]) -> Table {
    let mut t = Table::new(&header);
    for (x, y) in xs.iter().zip(ys) {
        t.push_floats(&[*x, *y]);
    }
    t
}

/// Reads a numeric CSV written by [`Table::write`].
pub fn read_numeric(path: &Path) -> Result<(Vec<String>, Vec<Vec<f64>>), AppError> {
    let csv_err = |source| AppError::Csv {
        path: path.to_path_buf(),
        source,
    };
    let mut r = csv::Reader::from_path(path).map_err(csv_err)?;
    let header = r.headers().map_err(csv_err)?.iter().map(String::from).collect();
    let mut rows = Vec::new();
    for rec in r.records() {
        let rec = rec.map_err(csv_err)?;
        let row: Option<Vec<f64>> = rec.iter().map(|c| c.parse().ok()).collect();
        match row {
            Some(row) => rows.push(row),
            None => return Err(AppError::Plot(format!("{}: non-numeric cell", path.display()))),
        }
    }
    Ok((header, rows))
}

/// Output file set of one run.
#[derive(Debug, Clone)]
pub struct OutDir {
    pub root: PathBuf,
}

impl OutDir {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        Self { root: root.into() }
    }

    pub fn file(&self, name: &str) -> PathBuf {
        self.root.join(name)
    }
}
