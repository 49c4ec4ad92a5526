//! Sample storage, declared bounds, rescaling to the unit box and CSV ingestion.

use std::fs::File;
use std::io::Read;
use std::path::Path;

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DatasetError {
    #[error("missing column `{0}` in CSV header")]
    MissingColumn(String),
    #[error("could not parse value at row {row}, column {col}")]
    ParseFailure { row: usize, col: usize },
    #[error("non-finite value at row {row}, column {col}")]
    NonFiniteValue { row: usize, col: usize },
    #[error("dataset needs at least 2 rows, got {0}")]
    TooFewRows(usize),
    #[error("sample {0} exceeds its declared bound")]
    BoundViolation(usize),
    #[error("column lengths disagree: {0}")]
    ShapeMismatch(String),
    #[error("bound must be a positive finite number, got {0}")]
    InvalidBound(f64),
    #[error("i/o error: {0}")]
    Io(String),
}

/// Dense row-major matrix of covariates, one row per sample.
#[derive(Debug, Clone, PartialEq)]
pub struct RowMatrix {
    rows: usize,
    cols: usize,
    values: Vec<f64>,
}

impl RowMatrix {
    pub fn new(rows: usize, cols: usize, values: Vec<f64>) -> Result<Self, DatasetError> {
        if values.len() != rows * cols {
            return Err(DatasetError::ShapeMismatch(format!(
                "{} values cannot fill a {rows}x{cols} matrix",
                values.len()
            )));
        }
        Ok(Self { rows, cols, values })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self, DatasetError> {
        let cols = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != cols) {
            return Err(DatasetError::ShapeMismatch("ragged rows".into()));
        }
        let values = rows.iter().flatten().copied().collect();
        Self::new(rows.len(), cols, values)
    }

    /// A single-column matrix.
    pub fn column(values: Vec<f64>) -> Self {
        Self {
            rows: values.len(),
            cols: 1,
            values,
        }
    }

    #[inline]
    pub fn nrows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn ncols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.values[i * self.cols..(i + 1) * self.cols]
    }

    pub fn rows_iter(&self) -> impl Iterator<Item = &[f64]> {
        self.values.chunks_exact(self.cols.max(1)).take(self.rows)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.values
    }

    /// Copies the rows listed in `idx`, in that order.
    pub fn select_rows(&self, idx: &[usize]) -> Self {
        let mut values = Vec::with_capacity(idx.len() * self.cols);
        for &i in idx {
            values.extend_from_slice(self.row(i));
        }
        Self {
            rows: idx.len(),
            cols: self.cols,
            values,
        }
    }

    pub fn set_row(&mut self, i: usize, row: &[f64]) {
        assert_eq!(row.len(), self.cols, "row length must match column count");
        self.values[i * self.cols..(i + 1) * self.cols].copy_from_slice(row);
    }
}

/// Raw `(x, y, z)` samples.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    x: Vec<f64>,
    y: Vec<f64>,
    z: RowMatrix,
}

impl Dataset {
    pub fn new(x: Vec<f64>, y: Vec<f64>, z: RowMatrix) -> Result<Self, DatasetError> {
        let n = x.len();
        if y.len() != n || z.nrows() != n {
            return Err(DatasetError::ShapeMismatch(format!(
                "x has {n} rows, y has {}, z has {}",
                y.len(),
                z.nrows()
            )));
        }
        if n < 2 {
            return Err(DatasetError::TooFewRows(n));
        }
        if z.ncols() == 0 {
            return Err(DatasetError::ShapeMismatch("z has no columns".into()));
        }
        for i in 0..n {
            if !x[i].is_finite() {
                return Err(DatasetError::NonFiniteValue { row: i, col: 0 });
            }
            if !y[i].is_finite() {
                return Err(DatasetError::NonFiniteValue { row: i, col: 1 });
            }
            if let Some(j) = z.row(i).iter().position(|v| !v.is_finite()) {
                return Err(DatasetError::NonFiniteValue { row: i, col: j + 2 });
            }
        }
        Ok(Self { x, y, z })
    }

    pub fn len(&self) -> usize {
        self.x.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.z.ncols()
    }

    pub fn x(&self) -> &[f64] {
        &self.x
    }

    pub fn y(&self) -> &[f64] {
        &self.y
    }

    pub fn z(&self) -> &RowMatrix {
        &self.z
    }
}

/// A dataset whose `x` and `y` columns have been divided by public bounds, so
/// that every stored value lies in `[-1, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundedDataset {
    data: Dataset,
    bound_x: f64,
    bound_y: f64,
    clipped: usize,
}

impl BoundedDataset {
    pub fn data(&self) -> &Dataset {
        &self.data
    }

    pub fn x(&self) -> &[f64] {
        self.data.x()
    }

    pub fn y(&self) -> &[f64] {
        self.data.y()
    }

    pub fn z(&self) -> &RowMatrix {
        self.data.z()
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn bound_x(&self) -> f64 {
        self.bound_x
    }

    pub fn bound_y(&self) -> f64 {
        self.bound_y
    }

    /// Number of stored `x`/`y` values that had to be clamped to `[-1, 1]`.
    pub fn clipped(&self) -> usize {
        self.clipped
    }

    /// Values on the original scale.
    pub fn unscaled(&self) -> Dataset {
        let x = self.data.x.iter().map(|v| v * self.bound_x).collect();
        let y = self.data.y.iter().map(|v| v * self.bound_y).collect();
        Dataset {
            x,
            y,
            z: self.data.z.clone(),
        }
    }
}

/// `sqrt(c * ln n)`, a high-probability bound on the maximum of `n` standard
/// Gaussian draws when `c` is large enough. `n` is taken as a real so that the
/// formula can be probed away from the integers.
pub fn infer_bound(n: f64, c: f64) -> Result<f64, DatasetError> {
    if !(c > 0.0 && c.is_finite()) {
        return Err(DatasetError::InvalidBound(c));
    }
    if !(n > 1.0 && n.is_finite()) {
        return Err(DatasetError::TooFewRows(n.max(0.0) as usize));
    }
    Ok((c * n.ln()).sqrt())
}

/// Divides `x` by `a` and `y` by `b`. With `clip` set, out-of-range values are
/// clamped to `[-1, 1]` and counted; otherwise they are rejected.
pub fn rescale(ds: Dataset, a: f64, b: f64, clip: bool) -> Result<BoundedDataset, DatasetError> {
    for bound in [a, b] {
        if !(bound > 0.0 && bound.is_finite()) {
            return Err(DatasetError::InvalidBound(bound));
        }
    }
    let Dataset { x, y, z } = ds;
    let mut clipped = 0;
    let mut scale = |values: Vec<f64>, bound: f64| -> Result<Vec<f64>, DatasetError> {
        values
            .into_iter()
            .enumerate()
            .map(|(i, v)| {
                let s = v / bound;
                if s.abs() <= 1.0 {
                    Ok(s)
                } else if clip {
                    clipped += 1;
                    Ok(s.clamp(-1.0, 1.0))
                } else {
                    Err(DatasetError::BoundViolation(i))
                }
            })
            .collect()
    };
    let x = scale(x, a)?;
    let y = scale(y, b)?;
    Ok(BoundedDataset {
        data: Dataset { x, y, z },
        bound_x: a,
        bound_y: b,
        clipped,
    })
}

/// Reads a CSV file with header `x,y,z1,...,zd`.
pub fn load_csv(path: impl AsRef<Path>, d: usize) -> Result<Dataset, DatasetError> {
    let mut text = String::new();
    File::open(path.as_ref())
        .and_then(|mut f| f.read_to_string(&mut text))
        .map_err(|e| DatasetError::Io(e.to_string()))?;
    parse_csv(text.as_bytes(), d)
}

/// Parses CSV text in the `load_csv` format from any reader.
pub fn parse_csv<R: Read>(reader: R, d: usize) -> Result<Dataset, DatasetError> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .quoting(false)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let header = rdr
        .headers()
        .map_err(|e| DatasetError::Io(e.to_string()))?
        .clone();
    let expected: Vec<String> = ["x".to_string(), "y".to_string()]
        .into_iter()
        .chain((1..=d).map(|j| format!("z{j}")))
        .collect();
    let mut positions = Vec::with_capacity(expected.len());
    for name in &expected {
        match header.iter().position(|h| h == name) {
            Some(p) => positions.push(p),
            None => return Err(DatasetError::MissingColumn(name.clone())),
        }
    }

    let (mut x, mut y, mut z) = (Vec::new(), Vec::new(), Vec::new());
    for (row, record) in rdr.records().enumerate() {
        let record = record.map_err(|_| DatasetError::ParseFailure { row, col: 0 })?;
        for (col, &p) in positions.iter().enumerate() {
            let field = record.get(p).ok_or(DatasetError::ParseFailure { row, col })?;
            let v: f64 = field
                .parse()
                .map_err(|_| DatasetError::ParseFailure { row, col })?;
            if !v.is_finite() {
                return Err(DatasetError::NonFiniteValue { row, col });
            }
            match col {
                0 => x.push(v),
                1 => y.push(v),
                _ => z.push(v),
            }
        }
    }
    let n = x.len();
    if n < 2 {
        return Err(DatasetError::TooFewRows(n));
    }
    Dataset::new(x, y, RowMatrix::new(n, d, z)?)
}

/// Writes a dataset in the `load_csv` format.
pub fn write_csv<W: std::io::Write>(ds: &Dataset, out: W) -> Result<(), DatasetError> {
    let mut w = csv::Writer::from_writer(out);
    let io = |e: csv::Error| DatasetError::Io(e.to_string());
    let mut header = vec!["x".to_string(), "y".to_string()];
    header.extend((1..=ds.dim()).map(|j| format!("z{j}")));
    w.write_record(&header).map_err(io)?;
    for i in 0..ds.len() {
        let mut rec = vec![ds.x[i].to_string(), ds.y[i].to_string()];
        rec.extend(ds.z.row(i).iter().map(|v| v.to_string()));
        w.write_record(&rec).map_err(io)?;
    }
    w.flush().map_err(|e| DatasetError::Io(e.to_string()))
}
