use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::{FeatureMatrix, Matrix};

/// Per-column training mean and population standard deviation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scaler {
    pub dim_names: Vec<String>,
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

/// Fit on training rows only. Masked (imputed) entries take the mean of the
/// unmasked training entries of their column before the spread is measured.
pub fn zscore_fit(train: &FeatureMatrix) -> Scaler {
    let (n, d) = (train.n_rows(), train.n_cols());
    let mut mean = vec![0.0; d];
    let mut std = vec![0.0; d];
    for j in 0..d {
        let observed: Vec<f64> = (0..n)
            .filter(|&i| !train.is_masked(i, j))
            .map(|i| train.values.get(i, j))
            .collect();
        let mu = if observed.is_empty() {
            0.0
        } else {
            observed.iter().sum::<f64>() / observed.len() as f64
        };
        let var = if n == 0 {
            0.0
        } else {
            observed.iter().map(|v| (v - mu) * (v - mu)).sum::<f64>() / n as f64
        };
        mean[j] = mu;
        std[j] = var.sqrt();
    }
    Scaler {
        dim_names: train.dim_names.clone(),
        mean,
        std,
    }
}

/// `(x - mean) / std`; masked entries and zero-spread columns become 0.
pub fn zscore_apply(scaler: &Scaler, m: &FeatureMatrix) -> Result<FeatureMatrix> {
    if m.dim_names != scaler.dim_names {
        return Err(Error::DimMismatch("scaler fitted on a different schema".into()));
    }
    let (n, d) = (m.n_rows(), m.n_cols());
    let mut out = Matrix::zeros(n, d);
    for i in 0..n {
        for j in 0..d {
            if !m.is_masked(i, j) && scaler.std[j] > 0.0 {
                out.set(i, j, (m.values.get(i, j) - scaler.mean[j]) / scaler.std[j]);
            }
        }
    }
    FeatureMatrix::new(m.row_ids.clone(), m.dim_names.clone(), out)
}

impl Scaler {
    pub fn save_json(&self, path: &std::path::Path) -> Result<()> {
        std::fs::write(path, serde_json::to_vec_pretty(self)?)?;
        Ok(())
    }
}
