//! Hand-built ONNX backbones for tests: 1x1 convolution to 512 channels,
//! ReLU, and max pooling, so every output has a direct closed form.

#![allow(dead_code)]

use std::path::Path;

use inkdx::cnn::{
    load_extractor, BackendSpec, ExtractorHandle, CNN_DIM,
};
use inkdx::render::RgbImage;
use prost::Message;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use tract_onnx::pb::{
    attribute_proto::AttributeType, tensor_shape_proto::dimension, tensor_shape_proto::Dimension,
    type_proto, AttributeProto, GraphProto, ModelProto, NodeProto, OperatorSetIdProto,
    StringStringEntryProto, TensorProto, TensorShapeProto, TypeProto, ValueInfoProto,
};

pub const FLOAT: i32 = 1;

pub fn value_info(name: &str, dims: &[i64]) -> ValueInfoProto {
    ValueInfoProto {
        name: name.into(),
        r#type: Some(TypeProto {
            value: Some(type_proto::Value::TensorType(type_proto::Tensor {
                elem_type: FLOAT,
                shape: Some(TensorShapeProto {
                    dim: dims
                        .iter()
                        .map(|&d| Dimension {
                            value: Some(dimension::Value::DimValue(d)),
                            ..Default::default()
                        })
                        .collect(),
                }),
            })),
            ..Default::default()
        }),
        ..Default::default()
    }
}

pub fn ints(name: &str, v: &[i64]) -> AttributeProto {
    AttributeProto {
        name: name.into(),
        r#type: AttributeType::Ints as i32,
        ints: v.to_vec(),
        ..Default::default()
    }
}

pub fn node(op: &str, inputs: &[&str], output: &str, attribute: Vec<AttributeProto>) -> NodeProto {
    NodeProto {
        input: inputs.iter().map(|s| s.to_string()).collect(),
        output: vec![output.into()],
        name: output.into(),
        op_type: op.into(),
        attribute,
        ..Default::default()
    }
}

pub struct Weights {
    pub w: Vec<[f32; 3]>,
    pub b: Vec<f32>,
}

pub fn weights(seed: u64) -> Weights {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Weights {
        w: (0..512).map(|_| std::array::from_fn(|_| rng.random_range(-1.0f32..1.0))).collect(),
        b: (0..512).map(|_| rng.random_range(-0.5f32..0.5)).collect(),
    }
}

pub struct ModelSpec<'a> {
    pub input_dims: [i64; 4],
    pub pool: i64,
    pub nhwc_output: bool,
    pub metadata: &'a [(&'a str, &'a str)],
}

pub fn write_model(path: &Path, wt: &Weights, spec: &ModelSpec) {
    let w = TensorProto {
        name: "w".into(),
        dims: vec![512, 3, 1, 1],
        data_type: FLOAT,
        float_data: wt.w.iter().flatten().copied().collect(),
        ..Default::default()
    };
    let b = TensorProto {
        name: "b".into(),
        dims: vec![512],
        data_type: FLOAT,
        float_data: wt.b.clone(),
        ..Default::default()
    };
    let mut nodes = vec![
        node("Transpose", &["input"], "nchw", vec![ints("perm", &[0, 3, 1, 2])]),
        node("Conv", &["nchw", "w", "b"], "conv", vec![ints("kernel_shape", &[1, 1])]),
        node("Relu", &["conv"], "relu", vec![]),
        node(
            "MaxPool",
            &["relu"],
            "pool",
            vec![ints("kernel_shape", &[spec.pool, spec.pool]), ints("strides", &[spec.pool, spec.pool])],
        ),
    ];
    let cells = 150 / spec.pool;
    let out = if spec.nhwc_output {
        nodes.push(node("Transpose", &["pool"], "features", vec![ints("perm", &[0, 2, 3, 1])]));
        value_info("features", &[1, cells, cells, 512])
    } else {
        nodes.last_mut().unwrap().output = vec!["features".into()];
        value_info("features", &[1, 512, cells, cells])
    };
    let model = ModelProto {
        ir_version: 7,
        opset_import: vec![OperatorSetIdProto {
            domain: String::new(),
            version: 13,
        }],
        producer_name: "test".into(),
        graph: Some(GraphProto {
            name: "backbone".into(),
            node: nodes,
            initializer: vec![w, b],
            input: vec![value_info("input", &spec.input_dims)],
            output: vec![out],
            ..Default::default()
        }),
        metadata_props: spec
            .metadata
            .iter()
            .map(|(k, v)| StringStringEntryProto {
                key: k.to_string(),
                value: v.to_string(),
            })
            .collect(),
        ..Default::default()
    };
    std::fs::write(path, model.encode_to_vec()).unwrap();
}

/// Direct evaluation: per pooled cell and channel, the max over the cell of
/// `relu(w . pre(pixel) + b)`, flattened row, column, channel.
pub fn oracle(img: &RgbImage, wt: &Weights, pre: impl Fn([u8; 3]) -> [f64; 3]) -> Vec<f64> {
    let mut out = Vec::with_capacity(CNN_DIM);
    for r in 0..4 {
        for c in 0..4 {
            for k in 0..512 {
                let mut best = f64::NEG_INFINITY;
                for y in r * 37..r * 37 + 37 {
                    for x in c * 37..c * 37 + 37 {
                        let p = pre(img.get(x, y));
                        let v: f64 = (0..3).map(|i| wt.w[k][i] as f64 * p[i]).sum::<f64>() + wt.b[k] as f64;
                        best = best.max(v.max(0.0));
                    }
                }
                out.push(best);
            }
        }
    }
    out
}

pub fn random_image(seed: u64) -> RgbImage {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    RgbImage::from_pixels(150, 150, (0..150 * 150 * 3).map(|_| rng.random()).collect()).unwrap()
}

pub fn onnx(path: &Path) -> inkdx::Result<ExtractorHandle> {
    load_extractor(&BackendSpec::PretrainedBackbone { path: path.to_path_buf() })
}

pub const RGB_UNIT: &[(&str, &str)] = &[
    ("input_layout", "NHWC"),
    ("output_layout", "NCHW"),
    ("channel_order", "RGB"),
    ("scale", "0.00392156862745098"),
    ("mean", "0,0,0"),
];

