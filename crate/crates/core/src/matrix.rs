//! Dense row-major matrices and named feature tables.

use std::collections::HashMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Dense row-major `f64` matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Matrix {
    data: Vec<f64>,
    rows: usize,
    cols: usize,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix {
            data: vec![0.0; rows * cols],
            rows,
            cols,
        }
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::DimMismatch(format!(
                "{} values for a {rows}x{cols} matrix",
                data.len()
            )));
        }
        Ok(Matrix { data, rows, cols })
    }

    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self> {
        let cols = rows.first().map_or(0, |r| r.as_ref().len());
        let mut data = Vec::with_capacity(rows.len() * cols);
        for r in rows {
            let r = r.as_ref();
            if r.len() != cols {
                return Err(Error::DimMismatch(format!("ragged rows: {} vs {cols}", r.len())));
            }
            data.extend_from_slice(r);
        }
        Ok(Matrix {
            data,
            rows: rows.len(),
            cols,
        })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.cols + j] = v;
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        (0..self.rows).map(|i| self.get(i, j)).collect()
    }

    pub fn select_rows(&self, idx: &[usize]) -> Matrix {
        let mut data = Vec::with_capacity(idx.len() * self.cols);
        for &i in idx {
            data.extend_from_slice(self.row(i));
        }
        Matrix {
            data,
            rows: idx.len(),
            cols: self.cols,
        }
    }

    pub fn select_cols(&self, idx: &[usize]) -> Matrix {
        let mut data = Vec::with_capacity(self.rows * idx.len());
        for i in 0..self.rows {
            let row = self.row(i);
            data.extend(idx.iter().map(|&j| row[j]));
        }
        Matrix {
            data,
            rows: self.rows,
            cols: idx.len(),
        }
    }

    /// Concatenate column-wise; all parts must have the same row count.
    pub fn hstack(parts: &[&Matrix]) -> Result<Matrix> {
        let rows = parts.first().map_or(0, |m| m.rows);
        if parts.iter().any(|m| m.rows != rows) {
            return Err(Error::DimMismatch("hstack of matrices with different row counts".into()));
        }
        let cols = parts.iter().map(|m| m.cols).sum();
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for m in parts {
                data.extend_from_slice(m.row(i));
            }
        }
        Ok(Matrix { data, rows, cols })
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }
}

/// Which representation a feature dimension came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Modality {
    Raw,
    Residual,
    Edge,
    Dynamic,
}

impl Modality {
    pub const IMAGE: [Modality; 3] = [Modality::Raw, Modality::Residual, Modality::Edge];

    pub fn name(self) -> &'static str {
        match self {
            Modality::Raw => "raw",
            Modality::Residual => "residual",
            Modality::Edge => "edge",
            Modality::Dynamic => "dynamic",
        }
    }
}

impl std::fmt::Display for Modality {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// Named feature values for one subject and task.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureVector {
    pub values: Vec<f64>,
    pub dim_names: Vec<String>,
    /// `None` when the vector concatenates several modalities; the per-dim
    /// modality then lives in the `<modality>:` prefix of each name.
    pub modality: Option<Modality>,
}

impl FeatureVector {
    /// Vector with dims named `<modality>:<index>`.
    pub fn indexed(modality: Modality, values: Vec<f64>) -> Self {
        let dim_names = (0..values.len()).map(|i| format!("{}:{i}", modality.name())).collect();
        FeatureVector {
            values,
            dim_names,
            modality: Some(modality),
        }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn is_valid(&self) -> bool {
        self.values.len() == self.dim_names.len() && self.values.iter().all(|v| v.is_finite())
    }
}

/// Rows are subjects (identified by `row_ids`), columns are named dims.
///
/// `mask` marks entries that were imputed rather than computed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureMatrix {
    pub row_ids: Vec<String>,
    pub dim_names: Vec<String>,
    pub values: Matrix,
    pub mask: Option<Vec<bool>>,
}

impl FeatureMatrix {
    pub fn new(row_ids: Vec<String>, dim_names: Vec<String>, values: Matrix) -> Result<Self> {
        if values.rows() != row_ids.len() || values.cols() != dim_names.len() {
            return Err(Error::DimMismatch(format!(
                "{}x{} values for {} rows and {} dims",
                values.rows(),
                values.cols(),
                row_ids.len(),
                dim_names.len()
            )));
        }
        Ok(FeatureMatrix {
            row_ids,
            dim_names,
            values,
            mask: None,
        })
    }

    /// Stack vectors that share one schema.
    pub fn from_vectors(row_ids: Vec<String>, vectors: &[FeatureVector]) -> Result<Self> {
        let dim_names = vectors.first().map(|v| v.dim_names.clone()).unwrap_or_default();
        if let Some(bad) = vectors.iter().find(|v| v.dim_names != dim_names) {
            return Err(Error::DimMismatch(format!(
                "schema mismatch: {} dims vs {}",
                bad.dim_names.len(),
                dim_names.len()
            )));
        }
        let rows: Vec<&[f64]> = vectors.iter().map(|v| v.values.as_slice()).collect();
        let values = if rows.is_empty() {
            Matrix::zeros(0, 0)
        } else {
            Matrix::from_rows(&rows)?
        };
        FeatureMatrix::new(row_ids, dim_names, values)
    }

    pub fn with_mask(mut self, mask: Vec<bool>) -> Result<Self> {
        if mask.len() != self.values.rows() * self.values.cols() {
            return Err(Error::DimMismatch("mask size differs from matrix size".into()));
        }
        self.mask = Some(mask);
        Ok(self)
    }

    pub fn n_rows(&self) -> usize {
        self.values.rows()
    }

    pub fn n_cols(&self) -> usize {
        self.values.cols()
    }

    pub fn is_masked(&self, i: usize, j: usize) -> bool {
        self.mask.as_ref().is_some_and(|m| m[i * self.n_cols() + j])
    }

    pub fn select_rows(&self, idx: &[usize]) -> FeatureMatrix {
        let mask = self.mask.as_ref().map(|m| {
            let c = self.n_cols();
            idx.iter().flat_map(|&i| m[i * c..(i + 1) * c].iter().copied()).collect()
        });
        FeatureMatrix {
            row_ids: idx.iter().map(|&i| self.row_ids[i].clone()).collect(),
            dim_names: self.dim_names.clone(),
            values: self.values.select_rows(idx),
            mask,
        }
    }

    pub fn select_cols(&self, idx: &[usize]) -> FeatureMatrix {
        let mask = self.mask.as_ref().map(|m| {
            let c = self.n_cols();
            (0..self.n_rows())
                .flat_map(|i| idx.iter().map(move |&j| m[i * c + j]))
                .collect()
        });
        FeatureMatrix {
            row_ids: self.row_ids.clone(),
            dim_names: idx.iter().map(|&j| self.dim_names[j].clone()).collect(),
            values: self.values.select_cols(idx),
            mask,
        }
    }

    /// Column-wise concatenation; row ids must agree.
    pub fn hstack(parts: &[&FeatureMatrix]) -> Result<FeatureMatrix> {
        let first = parts
            .first()
            .ok_or_else(|| Error::DimMismatch("nothing to concatenate".into()))?;
        if parts.iter().any(|p| p.row_ids != first.row_ids) {
            return Err(Error::DimMismatch("row ids differ between blocks".into()));
        }
        let values = Matrix::hstack(&parts.iter().map(|p| &p.values).collect::<Vec<_>>())?;
        let dim_names = parts.iter().flat_map(|p| p.dim_names.iter().cloned()).collect();
        let mask = if parts.iter().any(|p| p.mask.is_some()) {
            let mut m = Vec::with_capacity(values.rows() * values.cols());
            for i in 0..values.rows() {
                for p in parts {
                    m.extend((0..p.n_cols()).map(|j| p.is_masked(i, j)));
                }
            }
            Some(m)
        } else {
            None
        };
        Ok(FeatureMatrix {
            row_ids: first.row_ids.clone(),
            dim_names,
            values,
            mask,
        })
    }

    pub fn dim_index(&self) -> HashMap<&str, usize> {
        self.dim_names.iter().enumerate().map(|(i, n)| (n.as_str(), i)).collect()
    }

    /// Write as CSV: header `subject_id,<dims...>`, one row per subject.
    /// A mask, if present, goes to a sibling `<stem>.mask.csv`.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        let mut header = vec!["subject_id".to_string()];
        header.extend(self.dim_names.iter().cloned());
        w.write_record(&header)?;
        for i in 0..self.n_rows() {
            let mut rec = vec![self.row_ids[i].clone()];
            rec.extend(self.values.row(i).iter().map(|v| v.to_string()));
            w.write_record(&rec)?;
        }
        w.flush()?;
        if let Some(mask) = &self.mask {
            let mut w = csv::Writer::from_path(mask_path(path))?;
            w.write_record(&header)?;
            for i in 0..self.n_rows() {
                let mut rec = vec![self.row_ids[i].clone()];
                let c = self.n_cols();
                rec.extend(mask[i * c..(i + 1) * c].iter().map(|&b| if b { "1" } else { "0" }.to_string()));
                w.write_record(&rec)?;
            }
            w.flush()?;
        }
        Ok(())
    }

    /// Inverse of [`FeatureMatrix::write_csv`], picking up a mask file if one exists.
    pub fn read_csv(path: &Path) -> Result<FeatureMatrix> {
        let (row_ids, dim_names, rows) = read_table(path, |s| {
            s.parse::<f64>()
                .map_err(|_| Error::DimMismatch(format!("bad number `{s}` in {}", path.display())))
        })?;
        let cols = dim_names.len();
        let flat: Vec<f64> = rows.into_iter().flatten().collect();
        let values = Matrix::from_vec(row_ids.len(), cols, flat)?;
        let fm = FeatureMatrix::new(row_ids, dim_names, values)?;
        let mp = mask_path(path);
        if !mp.exists() {
            return Ok(fm);
        }
        let (ids, names, mask_rows) = read_table(&mp, |s| match s {
            "0" => Ok(false),
            "1" => Ok(true),
            _ => Err(Error::DimMismatch(format!("bad mask value `{s}`"))),
        })?;
        if ids != fm.row_ids || names != fm.dim_names {
            return Err(Error::DimMismatch("mask file does not match feature file".into()));
        }
        fm.with_mask(mask_rows.into_iter().flatten().collect())
    }
}

fn mask_path(path: &Path) -> std::path::PathBuf {
    let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or("features");
    path.with_file_name(format!("{stem}.mask.csv"))
}

type Table<T> = (Vec<String>, Vec<String>, Vec<Vec<T>>);

fn read_table<T>(path: &Path, parse: impl Fn(&str) -> Result<T>) -> Result<Table<T>> {
    let mut r = csv::Reader::from_path(path)?;
    let header = r.headers()?.clone();
    let dim_names: Vec<String> = header.iter().skip(1).map(str::to_string).collect();
    let mut ids = Vec::new();
    let mut rows = Vec::new();
    for rec in r.records() {
        let rec = rec?;
        ids.push(rec.get(0).unwrap_or_default().to_string());
        rows.push(rec.iter().skip(1).map(&parse).collect::<Result<Vec<T>>>()?);
    }
    Ok((ids, dim_names, rows))
}
