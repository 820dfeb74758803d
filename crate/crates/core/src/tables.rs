//! Plain-text columnar tables.
//!
//! ```text
//! # key=value          (metadata, optional, before the header)
//! x1,f,dist            (header)
//! 5.0000000000000000e-1,1.2500000000000000e-1,5.0000000000000000e-1
//! ```
//!
//! Numbers are written with 17 significant digits so that a write/read/write
//! cycle is byte-identical. `inf` is accepted wherever infinity is meaningful.

use std::collections::{BTreeMap, HashMap};
use std::path::Path;

use crate::error::{KlError, Result};
use crate::oracle::FnOracle;

/// Formats `v` with 17 significant digits (`inf`/`-inf` for infinities).
pub fn fmt_f64(v: f64) -> String {
    if v.is_infinite() {
        if v > 0.0 {
            "inf".into()
        } else {
            "-inf".into()
        }
    } else {
        format!("{v:.16e}")
    }
}

/// Rows of a parsed table plus the line each came from.
#[derive(Clone, Debug, PartialEq)]
pub struct RawTable {
    pub meta: BTreeMap<String, String>,
    pub header: Vec<String>,
    pub rows: Vec<Vec<f64>>,
    pub row_lines: Vec<usize>,
}

/// Parses metadata, header and numeric rows; every row must match the header width.
pub fn parse_table(text: &str) -> Result<RawTable> {
    let mut meta = BTreeMap::new();
    let mut header: Option<Vec<String>> = None;
    let mut rows = Vec::new();
    let mut row_lines = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let lineno = i + 1;
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        if let Some(rest) = line.strip_prefix('#') {
            if header.is_none() {
                if let Some((k, v)) = rest.split_once('=') {
                    let k = k.trim().to_string();
                    if meta.insert(k.clone(), v.trim().to_string()).is_some() {
                        return Err(KlError::parse(
                            lineno,
                            format!("duplicate metadata key {k:?}"),
                        ));
                    }
                }
            }
            continue;
        }
        let cells: Vec<&str> = line.split(',').map(str::trim).collect();
        match &header {
            None => {
                if cells.iter().any(|c| c.is_empty()) {
                    return Err(KlError::parse(lineno, "empty column name in header"));
                }
                header = Some(cells.iter().map(|c| c.to_ascii_lowercase()).collect());
            }
            Some(h) => {
                if cells.len() != h.len() {
                    return Err(KlError::parse(
                        lineno,
                        format!("expected {} columns, found {}", h.len(), cells.len()),
                    ));
                }
                let row = cells
                    .iter()
                    .map(|c| {
                        parse_number(c)
                            .ok_or_else(|| KlError::parse(lineno, format!("{c:?} is not a number")))
                    })
                    .collect::<Result<Vec<f64>>>()?;
                rows.push(row);
                row_lines.push(lineno);
            }
        }
    }
    let header =
        header.ok_or_else(|| KlError::parse(text.lines().count().max(1), "missing header row"))?;
    Ok(RawTable {
        meta,
        header,
        rows,
        row_lines,
    })
}

/// Like `str::parse::<f64>` but rejects NaN and spellings of infinity other than `inf`/`-inf`.
fn parse_number(s: &str) -> Option<f64> {
    let v: f64 = s.parse().ok()?;
    if v.is_nan() {
        return None;
    }
    if v.is_infinite() && !matches!(s, "inf" | "-inf" | "+inf") {
        return None;
    }
    Some(v)
}

/// Writes metadata, header and rows.
pub fn write_table(
    meta: &[(&str, String)],
    header: &[String],
    rows: impl IntoIterator<Item = Vec<f64>>,
) -> String {
    let mut out = String::new();
    for (k, v) in meta {
        out.push_str(&format!("# {k}={v}\n"));
    }
    out.push_str(&header.join(","));
    out.push('\n');
    for row in rows {
        let cells: Vec<String> = row.into_iter().map(fmt_f64).collect();
        out.push_str(&cells.join(","));
        out.push('\n');
    }
    out
}

/// Header `x1,…,xn,f,dist` for an `n`-dimensional sample table.
pub fn sample_header(dim: usize) -> Vec<String> {
    let mut h: Vec<String> = (1..=dim).map(|i| format!("x{i}")).collect();
    h.push("f".into());
    h.push("dist".into());
    h
}

/// Nearest-sample oracle over a fixed set of `(x, f(x), dist(0, ∂f(x)))` records.
#[derive(Clone, Debug)]
pub struct TabulatedOracle {
    dim: usize,
    points: Vec<Vec<f64>>,
    values: Vec<f64>,
    dists: Vec<f64>,
    meta: BTreeMap<String, String>,
    // exact coordinates → first sample, so queries at the samples themselves are O(1)
    index: HashMap<Vec<u64>, usize>,
}

impl PartialEq for TabulatedOracle {
    fn eq(&self, other: &Self) -> bool {
        self.points == other.points
            && self.values == other.values
            && self.dists == other.dists
            && self.meta == other.meta
    }
}

fn key(x: &[f64]) -> Vec<u64> {
    // +0.0 and -0.0 are the same point
    x.iter().map(|v| (v + 0.0).to_bits()).collect()
}

fn build_index(points: &[Vec<f64>]) -> HashMap<Vec<u64>, usize> {
    let mut index = HashMap::with_capacity(points.len());
    for (i, p) in points.iter().enumerate() {
        index.entry(key(p)).or_insert(i);
    }
    index
}

impl TabulatedOracle {
    pub fn new(points: Vec<Vec<f64>>, values: Vec<f64>, dists: Vec<f64>) -> Result<Self> {
        let dim = points.first().map_or(0, Vec::len);
        if dim == 0 {
            return Err(KlError::arg("tabulated oracle needs at least one sample"));
        }
        if points.iter().any(|p| p.len() != dim)
            || values.len() != points.len()
            || dists.len() != points.len()
        {
            return Err(KlError::arg("inconsistent sample columns"));
        }
        Ok(TabulatedOracle {
            dim,
            index: build_index(&points),
            points,
            values,
            dists,
            meta: BTreeMap::new(),
        })
    }

    /// Parses the `x1,…,xn,f,dist` format; see the module docs.
    pub fn parse(text: &str) -> Result<Self> {
        let t = parse_table(text)?;
        let n = t.header.len();
        let header_line = text
            .lines()
            .position(|l| {
                let l = l.trim();
                !l.is_empty() && !l.starts_with('#')
            })
            .map_or(1, |p| p + 1);
        if n < 3 || t.header[..] != sample_header(n - 2)[..] {
            return Err(KlError::parse(
                header_line,
                format!(
                    "header must be x1,...,xn,f,dist; got {}",
                    t.header.join(",")
                ),
            ));
        }
        if t.rows.is_empty() {
            return Err(KlError::parse(header_line, "no samples"));
        }
        let dim = n - 2;
        let mut points = Vec::with_capacity(t.rows.len());
        let mut values = Vec::with_capacity(t.rows.len());
        let mut dists = Vec::with_capacity(t.rows.len());
        for (row, &line) in t.rows.iter().zip(&t.row_lines) {
            if row[..dim].iter().any(|v| !v.is_finite()) {
                return Err(KlError::parse(line, "coordinates must be finite"));
            }
            if row[dim] == f64::NEG_INFINITY {
                return Err(KlError::parse(line, "f must not be -inf"));
            }
            let d = row[dim + 1];
            if !(d >= 0.0) || d == f64::NEG_INFINITY {
                return Err(KlError::parse(
                    line,
                    format!("dist must be nonnegative or inf, got {d}"),
                ));
            }
            points.push(row[..dim].to_vec());
            values.push(row[dim]);
            dists.push(d);
        }
        Ok(TabulatedOracle {
            dim,
            index: build_index(&points),
            points,
            values,
            dists,
            meta: t.meta,
        })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| KlError::Io(format!("{}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn points(&self) -> &[Vec<f64>] {
        &self.points
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn dists(&self) -> &[f64] {
        &self.dists
    }

    /// `# key=value` lines from the file.
    pub fn meta(&self) -> &BTreeMap<String, String> {
        &self.meta
    }

    fn nearest(&self, x: &[f64]) -> usize {
        if let Some(&i) = self.index.get(&key(x)) {
            return i;
        }
        let mut best = (0, f64::INFINITY);
        for (i, p) in self.points.iter().enumerate() {
            let d: f64 = p.iter().zip(x).map(|(a, b)| (a - b) * (a - b)).sum();
            if d < best.1 {
                best = (i, d);
            }
        }
        best.0
    }

    pub fn to_table(&self) -> String {
        let meta: Vec<(&str, String)> = self
            .meta
            .iter()
            .map(|(k, v)| (k.as_str(), v.clone()))
            .collect();
        let rows = self
            .points
            .iter()
            .zip(&self.values)
            .zip(&self.dists)
            .map(|((p, f), d)| {
                let mut r = p.clone();
                r.push(*f);
                r.push(*d);
                r
            });
        write_table(&meta, &sample_header(self.dim), rows)
    }
}

impl FnOracle for TabulatedOracle {
    fn dim(&self) -> usize {
        self.dim
    }

    fn value(&self, x: &[f64]) -> f64 {
        self.values[self.nearest(x)]
    }

    fn subgrad_dist(&self, x: &[f64]) -> f64 {
        self.dists[self.nearest(x)]
    }
}

/// Reads a tabulated oracle from a file.
pub fn load_tabulated_oracle(path: &Path) -> Result<TabulatedOracle> {
    TabulatedOracle::load(path)
}
