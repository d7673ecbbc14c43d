//! Sample storage, response slicing and CSV I/O.
//!
//! A [`Dataset`] holds `n` rows of `(y, x, w)` where `x` are the predictors
//! to be reduced and `w` the shielded predictors the reduction is conditioned
//! on. Slice indices are 0-based throughout the crate.

use std::fs::File;
use std::io::Write;
use std::path::Path;

use nalgebra::{DMatrix, DVector, RowDVector};

use crate::error::{DpdrError, Result};

/// Default number of response slices.
pub const DEFAULT_SLICES: usize = 5;

/// An immutable `(y, x, w)` sample.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    y: DVector<f64>,
    x: DMatrix<f64>,
    w: DMatrix<f64>,
    // row-major copies for the per-sample loops of the kernel estimators
    x_rows: Vec<f64>,
    w_rows: Vec<f64>,
}

impl Dataset {
    pub fn new(y: DVector<f64>, x: DMatrix<f64>, w: DMatrix<f64>) -> Result<Self> {
        let n = y.len();
        if x.nrows() != n || w.nrows() != n {
            return Err(DpdrError::InvalidData(format!(
                "row counts disagree: y has {n}, x has {}, w has {}",
                x.nrows(),
                w.nrows()
            )));
        }
        if n < 2 {
            return Err(DpdrError::InvalidData(format!("need at least 2 rows, got {n}")));
        }
        if x.ncols() == 0 {
            return Err(DpdrError::InvalidData("no x columns".into()));
        }
        if w.ncols() == 0 {
            return Err(DpdrError::InvalidData("no w columns".into()));
        }
        let finite = y.iter().chain(x.iter()).chain(w.iter()).all(|v| v.is_finite());
        if !finite {
            return Err(DpdrError::InvalidData("non-finite entry".into()));
        }
        let x_rows = x.transpose().as_slice().to_vec();
        let w_rows = w.transpose().as_slice().to_vec();
        Ok(Self {
            y,
            x,
            w,
            x_rows,
            w_rows,
        })
    }

    /// Builds a dataset from row slices; convenient in tests and bindings.
    pub fn from_rows(y: &[f64], x: &[Vec<f64>], w: &[Vec<f64>]) -> Result<Self> {
        let p = x.first().map_or(0, Vec::len);
        let q = w.first().map_or(0, Vec::len);
        if x.iter().any(|r| r.len() != p) || w.iter().any(|r| r.len() != q) {
            return Err(DpdrError::InvalidData("ragged rows".into()));
        }
        let xm = DMatrix::from_fn(x.len(), p, |i, j| x[i][j]);
        let wm = DMatrix::from_fn(w.len(), q, |i, j| w[i][j]);
        Self::new(DVector::from_column_slice(y), xm, wm)
    }

    pub fn n(&self) -> usize {
        self.y.len()
    }

    pub fn p(&self) -> usize {
        self.x.ncols()
    }

    pub fn q(&self) -> usize {
        self.w.ncols()
    }

    pub fn y(&self) -> &DVector<f64> {
        &self.y
    }

    pub fn x(&self) -> &DMatrix<f64> {
        &self.x
    }

    pub fn w(&self) -> &DMatrix<f64> {
        &self.w
    }

    /// Returns a dataset made of the given rows, in order. Indices may repeat.
    pub fn select_rows(&self, rows: &[usize]) -> Result<Self> {
        let y = DVector::from_fn(rows.len(), |i, _| self.y[rows[i]]);
        let x = DMatrix::from_fn(rows.len(), self.p(), |i, j| self.x[(rows[i], j)]);
        let w = DMatrix::from_fn(rows.len(), self.q(), |i, j| self.w[(rows[i], j)]);
        Self::new(y, x, w)
    }

    /// Replaces the predictor matrix, keeping `y` and `w`.
    pub fn with_x(&self, x: DMatrix<f64>) -> Result<Self> {
        Self::new(self.y.clone(), x, self.w.clone())
    }

    /// Writes the dataset with header `y,w1..wq,x1..xp`. Values use the
    /// shortest representation that parses back to the same `f64`.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut file = File::create(path).map_err(|source| DpdrError::Io {
            path: path.to_owned(),
            source,
        })?;
        file.write_all(self.to_csv_string().as_bytes())
            .map_err(|source| DpdrError::Io {
                path: path.to_owned(),
                source,
            })
    }

    pub fn to_csv_string(&self) -> String {
        let mut out = String::with_capacity(self.n() * (self.p() + self.q() + 1) * 20);
        let mut header = vec!["y".to_string()];
        header.extend((1..=self.q()).map(|j| format!("w{j}")));
        header.extend((1..=self.p()).map(|j| format!("x{j}")));
        out.push_str(&header.join(","));
        out.push('\n');
        for i in 0..self.n() {
            let mut cells = vec![format!("{}", self.y[i])];
            cells.extend(self.w.row(i).iter().map(|v| format!("{v}")));
            cells.extend(self.x.row(i).iter().map(|v| format!("{v}")));
            out.push_str(&cells.join(","));
            out.push('\n');
        }
        out
    }

    pub fn x_row(&self, i: usize) -> RowDVector<f64> {
        self.x.row(i).into_owned()
    }

    /// Row `i` of `x` as a contiguous slice.
    pub fn x_slice(&self, i: usize) -> &[f64] {
        let p = self.p();
        &self.x_rows[i * p..(i + 1) * p]
    }

    /// Row `i` of `w` as a contiguous slice.
    pub fn w_slice(&self, i: usize) -> &[f64] {
        let q = self.q();
        &self.w_rows[i * q..(i + 1) * q]
    }
}

/// Column roles for [`load_dataset`].
#[derive(Debug, Clone, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct ColumnSchema {
    pub y: String,
    pub x: Vec<String>,
    pub w: Vec<String>,
}

impl ColumnSchema {
    /// The schema written by [`Dataset::write_csv`].
    pub fn standard(p: usize, q: usize) -> Self {
        Self {
            y: "y".into(),
            x: (1..=p).map(|j| format!("x{j}")).collect(),
            w: (1..=q).map(|j| format!("w{j}")).collect(),
        }
    }
}

fn is_missing(cell: &str) -> bool {
    matches!(cell, "" | "NA" | "na" | "NaN" | "nan" | "?" | ".")
}

/// Loads a CSV with a header row. Rows with a missing cell (empty, `NA`,
/// `NaN`, `?`) in a used column are dropped; any other unparsable cell is an
/// error.
pub fn load_dataset(path: &Path, schema: &ColumnSchema) -> Result<Dataset> {
    let file = File::open(path).map_err(|source| DpdrError::Io {
        path: path.to_owned(),
        source,
    })?;
    read_dataset(file, schema)
}

/// The header row of a CSV file.
pub fn read_headers(path: &Path) -> Result<Vec<String>> {
    let file = File::open(path).map_err(|source| DpdrError::Io {
        path: path.to_owned(),
        source,
    })?;
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(file);
    Ok(rdr.headers()?.iter().map(str::to_string).collect())
}

/// Like [`load_dataset`], from any reader.
pub fn read_dataset<R: std::io::Read>(reader: R, schema: &ColumnSchema) -> Result<Dataset> {
    if schema.x.is_empty() {
        return Err(DpdrError::InvalidArgument("schema names no x columns".into()));
    }
    if schema.w.is_empty() {
        return Err(DpdrError::InvalidArgument("schema names no w columns".into()));
    }
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let headers = rdr.headers()?.clone();
    let find = |name: &str| {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| DpdrError::UnknownColumn(name.to_string()))
    };
    let y_idx = find(&schema.y)?;
    let x_idx = schema.x.iter().map(|c| find(c)).collect::<Result<Vec<_>>>()?;
    let w_idx = schema.w.iter().map(|c| find(c)).collect::<Result<Vec<_>>>()?;

    let mut ys = Vec::new();
    let mut xs: Vec<f64> = Vec::new();
    let mut ws: Vec<f64> = Vec::new();
    'rows: for (row, record) in rdr.records().enumerate() {
        let record = record?;
        let mut parsed = Vec::with_capacity(1 + x_idx.len() + w_idx.len());
        for &col in std::iter::once(&y_idx).chain(&x_idx).chain(&w_idx) {
            let cell = record.get(col).unwrap_or("");
            if is_missing(cell) {
                continue 'rows;
            }
            let value: f64 = cell.parse().map_err(|_| DpdrError::NonNumeric {
                column: headers[col].to_string(),
                row: row + 1,
                value: cell.to_string(),
            })?;
            parsed.push(value);
        }
        ys.push(parsed[0]);
        xs.extend_from_slice(&parsed[1..1 + x_idx.len()]);
        ws.extend_from_slice(&parsed[1 + x_idx.len()..]);
    }
    let n = ys.len();
    let x = DMatrix::from_row_slice(n, x_idx.len(), &xs);
    let w = DMatrix::from_row_slice(n, w_idx.len(), &ws);
    Dataset::new(DVector::from_vec(ys), x, w)
}

/// A partition of the response line into `H` slices `J_1..J_H`.
///
/// Training samples carry rank-based labels so that every slice holds
/// `floor(n/H)` or `ceil(n/H)` samples; `cut_points` define the
/// interval map used by [`SlicePartition::discretize`] for new values.
#[derive(Debug, Clone, PartialEq)]
pub struct SlicePartition {
    cut_points: Vec<f64>,
    labels: Vec<usize>,
    counts: Vec<usize>,
}

impl SlicePartition {
    /// Equal-frequency slicing of `y` into `slices` groups. Ties are broken
    /// by sample order.
    pub fn equal_frequency(y: &[f64], slices: usize) -> Result<Self> {
        let n = y.len();
        if slices == 0 {
            return Err(DpdrError::InvalidArgument("slice count must be positive".into()));
        }
        if n < slices {
            return Err(DpdrError::InvalidArgument(format!(
                "{n} samples cannot fill {slices} slices"
            )));
        }
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| y[a].total_cmp(&y[b]).then(a.cmp(&b)));
        let distinct = 1 + order.windows(2).filter(|w| y[w[0]] != y[w[1]]).count();
        if slices > distinct {
            return Err(DpdrError::TooFewDistinct { distinct, slices });
        }

        let bound = |l: usize| l * n / slices;
        let mut labels = vec![0; n];
        let mut counts = vec![0; slices];
        for l in 0..slices {
            for &i in &order[bound(l)..bound(l + 1)] {
                labels[i] = l;
                counts[l] += 1;
            }
        }
        let cut_points = (1..slices)
            .map(|l| {
                let b = bound(l);
                0.5 * (y[order[b - 1]] + y[order[b]])
            })
            .collect();
        Ok(Self {
            cut_points,
            labels,
            counts,
        })
    }

    /// Builds a partition from explicit per-sample labels (0-based).
    pub fn from_labels(labels: Vec<usize>, slices: usize) -> Result<Self> {
        let mut counts = vec![0; slices];
        for &l in &labels {
            if l >= slices {
                return Err(DpdrError::InvalidArgument(format!(
                    "label {l} out of range for {slices} slices"
                )));
            }
            counts[l] += 1;
        }
        if counts.contains(&0) {
            return Err(DpdrError::InvalidArgument("empty slice".into()));
        }
        Ok(Self {
            cut_points: Vec::new(),
            labels,
            counts,
        })
    }

    pub fn n_slices(&self) -> usize {
        self.counts.len()
    }

    pub fn cut_points(&self) -> &[f64] {
        &self.cut_points
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn label(&self, i: usize) -> usize {
        self.labels[i]
    }

    pub fn counts(&self) -> &[usize] {
        &self.counts
    }

    /// Members of slice `l`, in sample order.
    pub fn members(&self, l: usize) -> Vec<usize> {
        self.labels
            .iter()
            .enumerate()
            .filter_map(|(i, &li)| (li == l).then_some(i))
            .collect()
    }

    /// Maps a response value to its slice. Intervals are left-closed and
    /// right-open; the last is unbounded above.
    pub fn discretize(&self, y_value: f64) -> usize {
        discretize(y_value, &self.cut_points)
    }

    /// The partition carried along with a resample of the rows. Slices may
    /// become empty; estimators report that at query time.
    pub fn resample(&self, rows: &[usize]) -> Self {
        let labels: Vec<usize> = rows.iter().map(|&i| self.labels[i]).collect();
        let mut counts = vec![0; self.n_slices()];
        for &l in &labels {
            counts[l] += 1;
        }
        Self {
            cut_points: self.cut_points.clone(),
            labels,
            counts,
        }
    }
}

/// Interval lookup against sorted cut points: the number of cuts `<= y`.
pub fn discretize(y_value: f64, cut_points: &[f64]) -> usize {
    cut_points.partition_point(|&c| c <= y_value)
}
