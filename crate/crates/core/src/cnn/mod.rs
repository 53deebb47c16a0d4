//! Deep visual features from the three image representations.
//!
//! A fixed convolutional base maps a 150x150 RGB image to a 4x4x512 pooled
//! tensor, flattened to 8192 values with index `(row * 4 + col) * 512 + channel`.
//! Two interchangeable backends sit behind [`ExtractorHandle`]: an ONNX
//! backbone file and the deterministic [`StubHash`] used by tests and fixtures.

mod onnx;
mod stub;

use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::{FeatureMatrix, FeatureVector, Matrix, Modality};
use crate::render::{RgbImage, MODEL_SIDE};

pub use onnx::{read_reference_features, ChannelOrder, ExportManifest, Layout, OnnxBackbone, ParityReport, Preprocess};
pub use stub::StubHash;

pub const POOL_GRID: usize = 4;
pub const POOL_CHANNELS: usize = 512;
/// Flattened length of one pooled tensor.
pub const CNN_DIM: usize = POOL_GRID * POOL_GRID * POOL_CHANNELS;
/// Length of the raw, residual and edge vectors concatenated.
pub const COMBINED_DIM: usize = 3 * CNN_DIM;

/// Flat position of pooled cell `(row, col)` and `channel`.
pub fn flat_index(row: usize, col: usize, channel: usize) -> usize {
    (row * POOL_GRID + col) * POOL_CHANNELS + channel
}

/// Where the features come from.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum BackendSpec {
    PretrainedBackbone { path: PathBuf },
    StubHash { seed: u64 },
}

#[derive(Debug)]
enum Backend {
    Stub(StubHash),
    Onnx(Box<OnnxBackbone>),
}

/// Loaded feature extractor. Immutable and safe to share across threads.
#[derive(Debug)]
pub struct ExtractorHandle {
    spec: BackendSpec,
    backend: Backend,
}

/// Load and validate a backend.
pub fn load_extractor(spec: &BackendSpec) -> Result<ExtractorHandle> {
    let backend = match spec {
        BackendSpec::StubHash { seed } => Backend::Stub(StubHash::new(*seed)),
        BackendSpec::PretrainedBackbone { path } => Backend::Onnx(Box::new(OnnxBackbone::load(path)?)),
    };
    Ok(ExtractorHandle {
        spec: spec.clone(),
        backend,
    })
}

impl ExtractorHandle {
    pub fn spec(&self) -> &BackendSpec {
        &self.spec
    }

    pub fn input_side(&self) -> usize {
        MODEL_SIDE
    }

    pub fn output_dim(&self) -> usize {
        CNN_DIM
    }

    /// Human-readable description of the backend and its input convention.
    pub fn describe(&self) -> String {
        match &self.backend {
            Backend::Stub(s) => format!("stub_hash(seed={})", s.seed()),
            Backend::Onnx(o) => format!("onnx({}; {})", o.path().display(), o.preprocess()),
        }
    }

    /// Pooled activations of one image, tagged with `modality`.
    pub fn extract(&self, img: &RgbImage, modality: Modality) -> Result<FeatureVector> {
        let side = self.input_side();
        if img.width() != side || img.height() != side {
            return Err(Error::BadInputShape {
                expected: side,
                width: img.width(),
                height: img.height(),
            });
        }
        let values = match &self.backend {
            Backend::Stub(s) => s.activations(img),
            Backend::Onnx(o) => o.activations(img)?,
        };
        if values.len() != CNN_DIM || values.iter().any(|v| !v.is_finite()) {
            return Err(Error::ShapeMismatch(format!(
                "backend produced {} values (expected {CNN_DIM} finite)",
                values.len()
            )));
        }
        Ok(FeatureVector::indexed(modality, values))
    }

    /// Extract many images in parallel into a matrix whose rows follow `items`.
    pub fn extract_batch(&self, items: &[(String, RgbImage)], modality: Modality) -> Result<FeatureMatrix> {
        let vectors = items
            .par_iter()
            .map(|(_, img)| self.extract(img, modality))
            .collect::<Result<Vec<_>>>()?;
        let ids = items.iter().map(|(id, _)| id.clone()).collect();
        if vectors.is_empty() {
            let names = FeatureVector::indexed(modality, vec![0.0; CNN_DIM]).dim_names;
            return FeatureMatrix::new(ids, names, Matrix::zeros(0, CNN_DIM));
        }
        FeatureMatrix::from_vectors(ids, &vectors)
    }
}

/// Concatenate raw, residual and edge vectors in that order, whatever order
/// they are passed in.
pub fn combine_task_features(parts: [&FeatureVector; 3]) -> Result<FeatureVector> {
    let mut values = Vec::with_capacity(COMBINED_DIM);
    let mut dim_names = Vec::with_capacity(COMBINED_DIM);
    for m in Modality::IMAGE {
        let found: Vec<_> = parts.iter().filter(|p| p.modality == Some(m)).collect();
        let [p] = found.as_slice() else {
            return Err(Error::DimMismatch(format!("expected exactly one {m} vector, got {}", found.len())));
        };
        if p.len() != CNN_DIM || p.dim_names.len() != CNN_DIM {
            return Err(Error::DimMismatch(format!("{m} vector has {} dims, expected {CNN_DIM}", p.len())));
        }
        values.extend_from_slice(&p.values);
        dim_names.extend(p.dim_names.iter().cloned());
    }
    Ok(FeatureVector {
        values,
        dim_names,
        modality: None,
    })
}

/// Inverse of [`combine_task_features`].
pub fn split_task_features(fv: &FeatureVector) -> Result<[FeatureVector; 3]> {
    if fv.len() != COMBINED_DIM || fv.dim_names.len() != COMBINED_DIM {
        return Err(Error::DimMismatch(format!("{} dims, expected {COMBINED_DIM}", fv.len())));
    }
    Ok(std::array::from_fn(|i| FeatureVector {
        values: fv.values[i * CNN_DIM..(i + 1) * CNN_DIM].to_vec(),
        dim_names: fv.dim_names[i * CNN_DIM..(i + 1) * CNN_DIM].to_vec(),
        modality: Some(Modality::IMAGE[i]),
    }))
}

/// Path of the cached feature file for one task and modality.
pub fn cache_path(dir: &Path, modality: Modality, task: u8) -> PathBuf {
    dir.join(modality.name()).join(format!("task{task}.csv"))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn stub(seed: u64) -> ExtractorHandle {
        load_extractor(&BackendSpec::StubHash { seed }).unwrap()
    }

    fn zeros() -> RgbImage {
        RgbImage::from_pixels(150, 150, vec![0; 150 * 150 * 3]).unwrap()
    }

    #[test]
    fn stub_reports_dims() {
        let h = stub(0);
        assert_eq!(h.output_dim(), 8192);
        assert_eq!(h.input_side(), 150);
        assert_eq!(CNN_DIM, 8192);
        assert_eq!(COMBINED_DIM, 24576);
    }

    #[test]
    fn stub_reference_vector_seed0() {
        let fv = stub(0).extract(&zeros(), Modality::Raw).unwrap();
        assert_eq!(fv.len(), 8192);
        // computed once by an independent implementation of the weight hash
        let want = [
            5.437_501_587_310_963e-6,
            2.931_026_197_739_242_4e-4,
            0.324_406_041_182_364,
            0.998_791_199_838_828_6,
        ];
        for (got, want) in fv.values.iter().zip(want) {
            assert!((got - want).abs() < 1e-12, "{got} vs {want}");
        }
        assert_eq!(fv.dim_names[0], "raw:0");
        assert_eq!(fv.dim_names[8191], "raw:8191");
    }

    #[test]
    fn stub_is_deterministic_and_seeded() {
        let mut px = vec![255u8; 150 * 150 * 3];
        for (i, p) in px.iter_mut().enumerate().step_by(7) {
            *p = (i % 251) as u8;
        }
        let img = RgbImage::from_pixels(150, 150, px).unwrap();
        let a = stub(4).extract(&img, Modality::Edge).unwrap();
        let b = stub(4).extract(&img, Modality::Edge).unwrap();
        assert_eq!(a, b);
        assert!(a.is_valid());
        assert!(a.values.iter().all(|v| *v > 0.0 && *v < 1.0));
        let c = stub(5).extract(&img, Modality::Edge).unwrap();
        assert_ne!(a.values, c.values);
    }

    #[test]
    fn stub_is_local() {
        // changing one cell only moves that cell's 512 values
        let base = zeros();
        let mut px = base.pixels().to_vec();
        for y in 0..37 {
            for x in 0..37 {
                let i = (y * 150 + x) * 3;
                px[i..i + 3].copy_from_slice(&[200; 3]);
            }
        }
        let changed = RgbImage::from_pixels(150, 150, px).unwrap();
        let h = stub(0);
        let a = h.extract(&base, Modality::Raw).unwrap();
        let b = h.extract(&changed, Modality::Raw).unwrap();
        let moved: Vec<usize> = (0..CNN_DIM).filter(|&i| a.values[i] != b.values[i]).collect();
        assert!(!moved.is_empty());
        assert!(moved.iter().all(|&i| i < flat_index(0, 1, 0)));
    }

    #[test]
    fn bad_input_shape() {
        let img = RgbImage::from_pixels(10, 150, vec![0; 10 * 150 * 3]).unwrap();
        assert!(matches!(
            stub(0).extract(&img, Modality::Raw),
            Err(Error::BadInputShape { expected: 150, width: 10, height: 150 })
        ));
    }

    #[test]
    fn missing_model_file() {
        let r = load_extractor(&BackendSpec::PretrainedBackbone {
            path: "/nonexistent/backbone.onnx".into(),
        });
        assert!(matches!(r, Err(Error::ModelFileMissing(_))));
    }

    #[test]
    fn combine_reorders_and_splits_back() {
        let mk = |m: Modality, off: f64| {
            FeatureVector::indexed(m, (0..CNN_DIM).map(|i| off + i as f64).collect())
        };
        let (r, s, e) = (mk(Modality::Raw, 0.0), mk(Modality::Residual, 1e5), mk(Modality::Edge, 2e5));
        let c = combine_task_features([&e, &r, &s]).unwrap();
        assert_eq!(c.len(), 24576);
        assert_eq!(c.dim_names[0], "raw:0");
        assert_eq!(c.dim_names[8192], "residual:0");
        assert_eq!(c.dim_names[16384], "edge:0");
        assert_eq!(c.values[16384], 2e5);
        assert_eq!(split_task_features(&c).unwrap(), [r.clone(), s.clone(), e.clone()]);
        assert!(combine_task_features([&r, &r, &s]).is_err());
        let short = FeatureVector::indexed(Modality::Edge, vec![0.0; 10]);
        assert!(matches!(combine_task_features([&r, &s, &short]), Err(Error::DimMismatch(_))));
    }

    #[test]
    fn flat_index_layout() {
        assert_eq!(flat_index(0, 0, 0), 0);
        assert_eq!(flat_index(0, 0, 511), 511);
        assert_eq!(flat_index(0, 1, 0), 512);
        assert_eq!(flat_index(1, 0, 0), 2048);
        assert_eq!(flat_index(3, 3, 511), 8191);
    }
}
