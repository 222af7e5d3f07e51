//! Observation matrices, CSV ingestion and standardization.

use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use ndarray::{Array2, ArrayView1, Axis};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

/// An `n x p` matrix of observations (rows) on variables (columns).
///
/// Entries are always finite and the backing array is kept in standard
/// (row-major) layout so that rows can be handed out as contiguous slices.
#[derive(Debug, Clone, PartialEq)]
pub struct DataMatrix {
    values: Array2<f64>,
    column_names: Vec<String>,
    standardized: bool,
}

impl DataMatrix {
    /// Wrap a matrix, naming the columns `V1..Vp`.
    pub fn new(values: Array2<f64>) -> Result<Self> {
        let names = default_names(values.ncols());
        Self::with_names(values, names)
    }

    pub fn with_names(values: Array2<f64>, column_names: Vec<String>) -> Result<Self> {
        let (n, p) = values.dim();
        if n == 0 || p == 0 {
            return Err(Error::EmptyInput(format!("data matrix is {n}x{p}")));
        }
        if column_names.len() != p {
            return Err(Error::DimensionMismatch {
                expected: p,
                got: column_names.len(),
            });
        }
        if let Some(((i, j), v)) = values.indexed_iter().find(|(_, v)| !v.is_finite()) {
            return Err(Error::Parse {
                row: i + 1,
                col: j + 1,
                cell: v.to_string(),
            });
        }
        let values = values.as_standard_layout().into_owned();
        Ok(Self {
            values,
            column_names,
            standardized: false,
        })
    }

    /// Build from row vectors. All rows must have the same length.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.len();
        let p = rows.first().map_or(0, Vec::len);
        if let Some((i, r)) = rows.iter().enumerate().find(|(_, r)| r.len() != p) {
            return Err(Error::Shape(format!(
                "row {} has {} values, expected {p}",
                i + 1,
                r.len()
            )));
        }
        let flat: Vec<f64> = rows.iter().flatten().copied().collect();
        let values = Array2::from_shape_vec((n, p), flat).map_err(|e| Error::Shape(e.to_string()))?;
        Self::new(values)
    }

    pub fn n_obs(&self) -> usize {
        self.values.nrows()
    }

    pub fn n_vars(&self) -> usize {
        self.values.ncols()
    }

    pub fn values(&self) -> &Array2<f64> {
        &self.values
    }

    pub fn column_names(&self) -> &[String] {
        &self.column_names
    }

    pub fn is_standardized(&self) -> bool {
        self.standardized
    }

    /// Row `i` as a contiguous slice.
    pub fn row(&self, i: usize) -> &[f64] {
        let p = self.n_vars();
        let flat = self.values.as_slice().expect("standard layout");
        &flat[i * p..(i + 1) * p]
    }

    pub fn column(&self, j: usize) -> ArrayView1<'_, f64> {
        self.values.column(j)
    }

    /// The sub-matrix made of the given columns, in the given order.
    ///
    /// A column subset of standardized data is still standardized.
    pub fn select_columns(&self, cols: &[usize]) -> DataMatrix {
        let values = self.values.select(Axis(1), cols);
        let column_names = cols.iter().map(|&j| self.column_names[j].clone()).collect();
        DataMatrix {
            values: values.as_standard_layout().into_owned(),
            column_names,
            standardized: self.standardized,
        }
    }

    /// The sub-matrix made of the given rows (repeats allowed, as in a bootstrap draw).
    pub fn select_rows(&self, rows: &[usize]) -> DataMatrix {
        let values = self.values.select(Axis(0), rows);
        DataMatrix {
            values: values.as_standard_layout().into_owned(),
            column_names: self.column_names.clone(),
            standardized: false,
        }
    }

    /// Hex SHA-256 over the shape and the little-endian bytes of every entry.
    pub fn fingerprint(&self) -> String {
        let mut hasher = Sha256::new();
        hasher.update((self.n_obs() as u64).to_le_bytes());
        hasher.update((self.n_vars() as u64).to_le_bytes());
        for v in self.values.iter() {
            hasher.update(v.to_le_bytes());
        }
        hex::encode(hasher.finalize())
    }

    pub(crate) fn mark_standardized(mut self) -> Self {
        self.standardized = true;
        self
    }
}

pub(crate) fn default_names(p: usize) -> Vec<String> {
    (1..=p).map(|j| format!("V{j}")).collect()
}

/// Result of [`standardize`]: the scaled data plus the names of the columns
/// that were dropped for having zero variance.
#[derive(Debug, Clone)]
pub struct Standardized {
    pub data: DataMatrix,
    pub dropped: Vec<String>,
}

/// Center every column and scale it to unit second moment, `(1/n) sum x^2 = 1`.
///
/// Uses the population (`1/n`) convention. Constant columns cannot be scaled
/// and are dropped with a warning.
pub fn standardize(data: &DataMatrix) -> Result<Standardized> {
    let n = data.n_obs();
    if n < 2 {
        return Err(Error::Degenerate(format!(
            "standardization needs at least 2 observations, got {n}"
        )));
    }
    let nf = n as f64;
    let mut kept = Vec::new();
    let mut dropped = Vec::new();
    let mut columns = Vec::new();
    for j in 0..data.n_vars() {
        let col = data.column(j);
        let mean = col.sum() / nf;
        let var = col.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / nf;
        let sd = var.sqrt();
        // Anything this small relative to the column's magnitude is rounding noise.
        if !(sd > 1e-12 * mean.abs().max(1.0)) {
            dropped.push(data.column_names()[j].clone());
            continue;
        }
        kept.push(j);
        columns.push(col.mapv(|x| (x - mean) / sd));
    }
    if kept.is_empty() {
        return Err(Error::Degenerate("every column has zero variance".into()));
    }
    for name in &dropped {
        log::warn!("dropping zero-variance column {name:?}");
    }
    let mut values = Array2::zeros((n, kept.len()));
    for (c, col) in columns.into_iter().enumerate() {
        values.column_mut(c).assign(&col);
    }
    let names = kept.iter().map(|&j| data.column_names()[j].clone()).collect();
    let data = DataMatrix::with_names(values, names)?.mark_standardized();
    Ok(Standardized { data, dropped })
}

/// Read a comma-separated numeric file.
pub fn load_csv<P: AsRef<Path>>(path: P, has_header: bool) -> Result<DataMatrix> {
    let file = File::open(path.as_ref())?;
    read_csv(file, has_header)
}

/// Parse comma-separated numeric text. Without a header the columns are named `V1..Vp`.
pub fn read_csv<R: Read>(reader: R, has_header: bool) -> Result<DataMatrix> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let mut names: Option<Vec<String>> = None;
    let mut rows: Vec<Vec<f64>> = Vec::new();
    let mut width: Option<usize> = None;
    for (line, record) in rdr.records().enumerate() {
        let record = record?;
        if record.iter().all(str::is_empty) {
            continue;
        }
        if has_header && names.is_none() {
            names = Some(record.iter().map(str::to_owned).collect());
            width = Some(record.len());
            continue;
        }
        let expected = *width.get_or_insert(record.len());
        if record.len() != expected {
            return Err(Error::Shape(format!(
                "line {} has {} fields, expected {expected}",
                line + 1,
                record.len()
            )));
        }
        let row = record
            .iter()
            .enumerate()
            .map(|(j, cell)| match cell.parse::<f64>() {
                Ok(v) if v.is_finite() => Ok(v),
                _ => Err(Error::Parse {
                    row: line + 1,
                    col: j + 1,
                    cell: cell.to_owned(),
                }),
            })
            .collect::<Result<Vec<f64>>>()?;
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(Error::EmptyInput("no data rows".into()));
    }
    let p = rows[0].len();
    let flat: Vec<f64> = rows.iter().flatten().copied().collect();
    let values = Array2::from_shape_vec((rows.len(), p), flat).map_err(|e| Error::Shape(e.to_string()))?;
    let names = names.unwrap_or_else(|| default_names(p));
    DataMatrix::with_names(values, names)
}

/// Write with a header row of column names. Values use the shortest
/// representation that parses back to the same `f64`.
pub fn write_csv<W: Write>(data: &DataMatrix, writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(data.column_names())?;
    for i in 0..data.n_obs() {
        w.write_record(data.row(i).iter().map(|v| v.to_string()))?;
    }
    w.flush()?;
    Ok(())
}
