//! ONNX backbone backend.
//!
//! The model file carries its input convention as metadata properties:
//!
//! | key              | values                     | default                    |
//! |------------------|----------------------------|----------------------------|
//! | `input_layout`   | `NHWC` or `NCHW`           | `NHWC`                     |
//! | `output_layout`  | `NHWC` or `NCHW`           | same as `input_layout`     |
//! | `channel_order`  | `RGB` or `BGR`             | `BGR`                      |
//! | `scale`          | real, applied to 0..255    | `1`                        |
//! | `mean`           | three reals, model order   | `103.939,116.779,123.68`   |
//! | `std`            | three reals, model order   | `1,1,1`                    |
//!
//! Each input value is `(pixel * scale - mean[c]) / std[c]`.

use std::fmt;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use tract_onnx::pb::ModelProto;
use tract_onnx::prelude::*;

use super::{POOL_CHANNELS, POOL_GRID};
use crate::error::{Error, Result};
use crate::render::{RgbImage, MODEL_SIDE};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Layout {
    #[serde(rename = "NHWC")]
    Nhwc,
    #[serde(rename = "NCHW")]
    Nchw,
}

impl Layout {
    fn parse(s: &str) -> Result<Self> {
        match s.trim().to_ascii_uppercase().as_str() {
            "NHWC" => Ok(Layout::Nhwc),
            "NCHW" => Ok(Layout::Nchw),
            other => Err(Error::Model(format!("unknown layout `{other}`"))),
        }
    }

    /// Shape of a `[1, side, side, channels]` tensor in this layout.
    fn shape(self, side: usize, channels: usize) -> [usize; 4] {
        match self {
            Layout::Nhwc => [1, side, side, channels],
            Layout::Nchw => [1, channels, side, side],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ChannelOrder {
    #[serde(rename = "RGB")]
    Rgb,
    #[serde(rename = "BGR")]
    Bgr,
}

/// Pixel preprocessing declared by the model file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Preprocess {
    pub input_layout: Layout,
    pub output_layout: Layout,
    pub channel_order: ChannelOrder,
    pub scale: f64,
    pub mean: [f64; 3],
    pub std: [f64; 3],
}

impl Default for Preprocess {
    fn default() -> Self {
        Preprocess {
            input_layout: Layout::Nhwc,
            output_layout: Layout::Nhwc,
            channel_order: ChannelOrder::Bgr,
            scale: 1.0,
            mean: [103.939, 116.779, 123.68],
            std: [1.0; 3],
        }
    }
}

impl fmt::Display for Preprocess {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{:?} in, {:?} out, {:?}, x*{} - {:?} / {:?}",
            self.input_layout, self.output_layout, self.channel_order, self.scale, self.mean, self.std
        )
    }
}

fn parse_triple(key: &str, s: &str) -> Result<[f64; 3]> {
    let v: Vec<f64> = s
        .split(',')
        .map(|p| p.trim().parse::<f64>())
        .collect::<std::result::Result<_, _>>()
        .map_err(|_| Error::Model(format!("metadata `{key}` is not a list of numbers: `{s}`")))?;
    v.try_into()
        .map_err(|_| Error::Model(format!("metadata `{key}` needs three values: `{s}`")))
}

impl Preprocess {
    /// Read the convention from `(key, value)` metadata pairs.
    pub fn from_metadata<'a>(props: impl IntoIterator<Item = (&'a str, &'a str)>) -> Result<Self> {
        let mut p = Preprocess::default();
        let mut output_layout = None;
        for (k, v) in props {
            match k {
                "input_layout" => p.input_layout = Layout::parse(v)?,
                "output_layout" => output_layout = Some(Layout::parse(v)?),
                "channel_order" => {
                    p.channel_order = match v.trim().to_ascii_uppercase().as_str() {
                        "RGB" => ChannelOrder::Rgb,
                        "BGR" => ChannelOrder::Bgr,
                        o => return Err(Error::Model(format!("unknown channel order `{o}`"))),
                    }
                }
                "scale" => {
                    p.scale = v
                        .trim()
                        .parse()
                        .map_err(|_| Error::Model(format!("metadata `scale` is not a number: `{v}`")))?
                }
                "mean" => p.mean = parse_triple(k, v)?,
                "std" => p.std = parse_triple(k, v)?,
                _ => {}
            }
        }
        p.output_layout = output_layout.unwrap_or(p.input_layout);
        if p.std.iter().any(|s| *s == 0.0 || !s.is_finite()) {
            return Err(Error::Model("metadata `std` must be finite and non-zero".into()));
        }
        Ok(p)
    }

    /// Model input tensor values for `img`, laid out per `input_layout`.
    pub fn apply(&self, img: &RgbImage) -> Vec<f32> {
        let side = img.width();
        let value = |x: usize, y: usize, c: usize| {
            let src = match self.channel_order {
                ChannelOrder::Rgb => c,
                ChannelOrder::Bgr => 2 - c,
            };
            let px = img.get(x, y)[src] as f64;
            ((px * self.scale - self.mean[c]) / self.std[c]) as f32
        };
        let mut out = Vec::with_capacity(side * side * 3);
        match self.input_layout {
            Layout::Nhwc => {
                for y in 0..side {
                    for x in 0..side {
                        for c in 0..3 {
                            out.push(value(x, y, c));
                        }
                    }
                }
            }
            Layout::Nchw => {
                for c in 0..3 {
                    for y in 0..side {
                        for x in 0..side {
                            out.push(value(x, y, c));
                        }
                    }
                }
            }
        }
        out
    }
}

/// `manifest.json` written next to an exported backbone.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExportManifest {
    pub source_model: String,
    pub weights_sha256: String,
    pub truncation_point: String,
    pub input_shape: Vec<usize>,
    pub output_shape: Vec<usize>,
    pub preprocessing: Preprocess,
}

impl ExportManifest {
    pub fn load(path: &Path) -> Result<Self> {
        let m: ExportManifest = serde_json::from_slice(&std::fs::read(path)?)?;
        m.validate()?;
        Ok(m)
    }

    pub fn validate(&self) -> Result<()> {
        let flat: usize = self.output_shape.iter().product();
        if flat != super::CNN_DIM {
            return Err(Error::ShapeMismatch(format!(
                "manifest output shape {:?} flattens to {flat}, expected {}",
                self.output_shape,
                super::CNN_DIM
            )));
        }
        let mut input = self.input_shape.clone();
        input.sort_unstable();
        if input != [3, MODEL_SIDE, MODEL_SIDE] {
            return Err(Error::ShapeMismatch(format!(
                "manifest input shape {:?}, expected {MODEL_SIDE}x{MODEL_SIDE}x3",
                self.input_shape
            )));
        }
        Ok(())
    }
}

type Plan = Arc<TypedRunnableModel>;

/// Loaded, optimized ONNX convolutional base.
pub struct OnnxBackbone {
    path: PathBuf,
    preprocess: Preprocess,
    plan: Plan,
}

impl fmt::Debug for OnnxBackbone {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("OnnxBackbone")
            .field("path", &self.path)
            .field("preprocess", &self.preprocess)
            .finish_non_exhaustive()
    }
}

fn model_err(e: impl fmt::Display) -> Error {
    Error::Model(e.to_string())
}

/// Concrete dims of the first graph input, `None` for symbolic ones.
fn declared_input_dims(proto: &ModelProto) -> Option<Vec<Option<i64>>> {
    use tract_onnx::pb::tensor_shape_proto::dimension::Value;
    use tract_onnx::pb::type_proto::Value as TypeValue;
    let graph = proto.graph.as_ref()?;
    let initializers: std::collections::HashSet<&str> =
        graph.initializer.iter().map(|t| t.name.as_str()).collect();
    let input = graph.input.iter().find(|i| !initializers.contains(i.name.as_str()))?;
    let TypeValue::TensorType(tt) = input.r#type.as_ref()?.value.as_ref()?;
    let dims = tt
        .shape
        .as_ref()?
        .dim
        .iter()
        .map(|d| match &d.value {
            Some(Value::DimValue(v)) if *v > 0 => Some(*v),
            _ => None,
        })
        .collect();
    Some(dims)
}

impl OnnxBackbone {
    pub fn load(path: &Path) -> Result<Self> {
        if !path.is_file() {
            return Err(Error::ModelFileMissing(path.to_path_buf()));
        }
        let onnx = tract_onnx::onnx();
        let proto = onnx.proto_model_for_path(path).map_err(model_err)?;
        let preprocess = Preprocess::from_metadata(
            proto
                .metadata_props
                .iter()
                .map(|p| (p.key.as_str(), p.value.as_str())),
        )?;

        let want_in = preprocess.input_layout.shape(MODEL_SIDE, 3);
        if let Some(dims) = declared_input_dims(&proto) {
            let ok = dims.len() == 4
                && dims
                    .iter()
                    .zip(want_in)
                    .all(|(d, w)| d.is_none_or(|d| d as usize == w));
            if !ok {
                return Err(Error::ShapeMismatch(format!(
                    "model input {dims:?} does not accept {want_in:?}"
                )));
            }
        }

        let model = onnx
            .model_for_proto_model(&proto)
            .map_err(model_err)?
            .with_input_fact(0, f32::fact(want_in).into())
            .map_err(model_err)?
            .into_typed()
            .map_err(model_err)?;
        let out_fact = model.output_fact(0).map_err(model_err)?;
        let out_shape: Option<Vec<usize>> = out_fact.shape.as_concrete().map(|s| s.to_vec());
        let want_out = preprocess.output_layout.shape(POOL_GRID, POOL_CHANNELS);
        if out_shape.as_deref() != Some(&want_out[..]) {
            return Err(Error::ShapeMismatch(format!(
                "model output {:?}, expected {want_out:?} ({} features)",
                out_fact.shape,
                super::CNN_DIM
            )));
        }
        let plan = model
            .into_optimized()
            .map_err(model_err)?
            .into_runnable()
            .map_err(model_err)?;
        Ok(OnnxBackbone {
            path: path.to_path_buf(),
            preprocess,
            plan,
        })
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    pub fn preprocess(&self) -> &Preprocess {
        &self.preprocess
    }

    /// Pooled activations flattened row, column, channel.
    pub fn activations(&self, img: &RgbImage) -> Result<Vec<f64>> {
        let shape = self.preprocess.input_layout.shape(MODEL_SIDE, 3);
        let input = Tensor::from_shape(&shape, &self.preprocess.apply(img)).map_err(model_err)?;
        let out = self.plan.run(tvec!(input.into())).map_err(model_err)?;
        let view = out[0].to_plain_array_view::<f32>().map_err(model_err)?;
        let mut v = Vec::with_capacity(super::CNN_DIM);
        for r in 0..POOL_GRID {
            for c in 0..POOL_GRID {
                for k in 0..POOL_CHANNELS {
                    let x = match self.preprocess.output_layout {
                        Layout::Nhwc => view[[0, r, c, k]],
                        Layout::Nchw => view[[0, k, r, c]],
                    };
                    v.push(x as f64);
                }
            }
        }
        Ok(v)
    }
}

/// Agreement between this runtime and an exporter's reference features.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ParityReport {
    pub dims: usize,
    pub max_abs_err: f64,
    /// `max |a - b| / max(|b|, floor)` with `floor = 1e-3 * max |b|`.
    pub max_rel_err: f64,
}

impl ParityReport {
    pub fn compare(ours: &[f64], reference: &[f64]) -> Result<Self> {
        if ours.len() != reference.len() {
            return Err(Error::DimMismatch(format!(
                "{} features vs {} reference values",
                ours.len(),
                reference.len()
            )));
        }
        let floor = 1e-3 * reference.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let floor = if floor > 0.0 { floor } else { f64::MIN_POSITIVE };
        let mut rep = ParityReport {
            dims: ours.len(),
            max_abs_err: 0.0,
            max_rel_err: 0.0,
        };
        for (a, b) in ours.iter().zip(reference) {
            let d = (a - b).abs();
            rep.max_abs_err = rep.max_abs_err.max(d);
            rep.max_rel_err = rep.max_rel_err.max(d / b.abs().max(floor));
        }
        Ok(rep)
    }

    pub fn passes(&self, tol: f64) -> bool {
        self.max_rel_err <= tol
    }
}

/// Reference features in file order. Accepts one value per line, `dim,value`
/// pairs, or a single wide row; non-numeric fields such as headers are skipped.
pub fn read_reference_features(path: &Path) -> Result<Vec<f64>> {
    let mut r = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .from_path(path)?;
    let mut out = Vec::new();
    for rec in r.records() {
        let rec = rec?;
        let fields: Vec<&str> = if rec.len() == 2 { vec![&rec[1]] } else { rec.iter().collect() };
        out.extend(fields.iter().filter_map(|f| f.trim().parse::<f64>().ok()));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn metadata_defaults_and_overrides() {
        let p = Preprocess::from_metadata([]).unwrap();
        assert_eq!(p, Preprocess::default());
        let p = Preprocess::from_metadata([
            ("input_layout", "nchw"),
            ("channel_order", "RGB"),
            ("mean", "0.485, 0.456,0.406"),
            ("std", "0.229,0.224,0.225"),
            ("scale", "0.00392156862745098"),
            ("something_else", "ignored"),
        ])
        .unwrap();
        assert_eq!(p.input_layout, Layout::Nchw);
        assert_eq!(p.output_layout, Layout::Nchw);
        assert_eq!(p.channel_order, ChannelOrder::Rgb);
        assert_eq!(p.mean, [0.485, 0.456, 0.406]);
        assert!(Preprocess::from_metadata([("mean", "1,2")]).is_err());
        assert!(Preprocess::from_metadata([("std", "1,0,1")]).is_err());
        assert!(Preprocess::from_metadata([("input_layout", "HWC")]).is_err());
    }

    #[test]
    fn preprocess_bgr_mean_subtraction() {
        let mut px = vec![0u8; 2 * 2 * 3];
        px[0..3].copy_from_slice(&[10, 20, 30]);
        let img = RgbImage::from_pixels(2, 2, px).unwrap();
        let v = Preprocess::default().apply(&img);
        // first pixel in B, G, R order minus the ImageNet means
        let want = [30.0 - 103.939, 20.0 - 116.779, 10.0 - 123.68];
        for (g, w) in v[..3].iter().zip(want) {
            assert!((*g as f64 - w).abs() < 1e-4);
        }
        let p = Preprocess {
            input_layout: Layout::Nchw,
            channel_order: ChannelOrder::Rgb,
            mean: [0.0; 3],
            ..Preprocess::default()
        };
        let v = p.apply(&img);
        assert_eq!((v[0], v[4], v[8]), (10.0, 20.0, 30.0));
    }

    #[test]
    fn parity_report() {
        let r = ParityReport::compare(&[1.0, 0.0, 2.0005], &[1.0, 0.0, 2.0]).unwrap();
        assert!((r.max_abs_err - 0.0005).abs() < 1e-12);
        assert!((r.max_rel_err - 0.00025).abs() < 1e-9);
        assert!(r.passes(1e-3));
        // zero reference entries are compared against the floor
        let r = ParityReport::compare(&[0.01, 10.0], &[0.0, 10.0]).unwrap();
        assert!((r.max_rel_err - 1.0).abs() < 1e-12);
        assert!(ParityReport::compare(&[1.0], &[1.0, 2.0]).is_err());
    }

    #[test]
    fn reference_feature_formats() {
        let dir = tempfile::tempdir().unwrap();
        let a = dir.path().join("a.csv");
        std::fs::write(&a, "value\n1.5\n-2\n3e-1\n").unwrap();
        assert_eq!(read_reference_features(&a).unwrap(), vec![1.5, -2.0, 0.3]);
        let b = dir.path().join("b.csv");
        std::fs::write(&b, "dim,value\nraw:0,1.5\nraw:1,-2\n").unwrap();
        assert_eq!(read_reference_features(&b).unwrap(), vec![1.5, -2.0]);
        let c = dir.path().join("c.csv");
        std::fs::write(&c, "1,2,3,4\n").unwrap();
        assert_eq!(read_reference_features(&c).unwrap(), vec![1.0, 2.0, 3.0, 4.0]);
    }

    #[test]
    fn manifest_validation() {
        let m = ExportManifest {
            source_model: "vgg16".into(),
            weights_sha256: "00".into(),
            truncation_point: "block5_pool".into(),
            input_shape: vec![150, 150, 3],
            output_shape: vec![4, 4, 512],
            preprocessing: Preprocess::default(),
        };
        m.validate().unwrap();
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("manifest.json");
        std::fs::write(&p, serde_json::to_vec(&m).unwrap()).unwrap();
        assert_eq!(ExportManifest::load(&p).unwrap(), m);
        let bad = ExportManifest {
            output_shape: vec![5, 5, 512],
            ..m
        };
        assert!(matches!(bad.validate(), Err(Error::ShapeMismatch(_))));
    }
}
