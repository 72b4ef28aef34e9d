use std::collections::HashMap;
use std::path::Path;

use prost::Message;
use rand::Rng;

use super::graph::{weights_hash, GraphHandle, LayerManifest, Sidecar};
use super::onnx::{tensor_proto, GraphProto, ModelProto, TensorProto};
use super::{DeepError, Result};
use crate::seed::rng_for;

#[derive(Debug, Clone, Copy, PartialEq)]
enum Init {
    Glorot { fan_in: usize, fan_out: usize },
    Constant(f32),
}

/// Decides how each learned parameter is re-drawn from the operator that
/// consumes it. Initializers with no recognized role are left alone.
fn roles(graph: &GraphProto) -> HashMap<String, Init> {
    let dims: HashMap<&str, Vec<usize>> = graph
        .initializer
        .iter()
        .filter(|t| t.data_type == Some(tensor_proto::FLOAT))
        .map(|t| {
            (
                t.name.as_deref().unwrap_or(""),
                t.dims.iter().map(|&d| d.max(0) as usize).collect(),
            )
        })
        .collect();
    let producer_op: HashMap<&str, &str> = graph
        .node
        .iter()
        .flat_map(|n| {
            n.output
                .iter()
                .map(move |o| (o.as_str(), n.op_type.as_deref().unwrap_or("")))
        })
        .collect();
    let mut out = HashMap::new();
    for node in &graph.node {
        let op = node.op_type.as_deref().unwrap_or("");
        let int_attr = |name: &str| {
            node.attribute
                .iter()
                .find(|a| a.name.as_deref() == Some(name))
                .and_then(|a| a.i)
                .unwrap_or(0)
        };
        for (pos, name) in node.input.iter().enumerate() {
            let Some(shape) = dims.get(name.as_str()) else { continue };
            let role = match (op, pos) {
                ("Conv", 1) if shape.len() >= 3 => {
                    let field: usize = shape[2..].iter().product();
                    Some(Init::Glorot {
                        fan_in: shape[1] * field,
                        fan_out: shape[0] * field,
                    })
                }
                ("Conv", 2) | ("Gemm", 2) => Some(Init::Constant(0.0)),
                ("Gemm", 1) if shape.len() == 2 => {
                    let (fan_in, fan_out) = if int_attr("transB") != 0 {
                        (shape[1], shape[0])
                    } else {
                        (shape[0], shape[1])
                    };
                    Some(Init::Glorot { fan_in, fan_out })
                }
                ("MatMul", _) if shape.len() == 2 => Some(Init::Glorot {
                    fan_in: shape[0],
                    fan_out: shape[1],
                }),
                ("Add", _) if shape.len() == 1 => {
                    let other = &node.input[1 - pos.min(1)];
                    matches!(producer_op.get(other.as_str()), Some(&("MatMul" | "Conv" | "Gemm")))
                        .then_some(Init::Constant(0.0))
                }
                ("BatchNormalization", 1 | 4) => Some(Init::Constant(1.0)),
                ("BatchNormalization", 2 | 3) => Some(Init::Constant(0.0)),
                _ => None,
            };
            if let Some(role) = role {
                out.entry(name.clone()).or_insert(role);
            }
        }
    }
    out
}

fn redraw(tensor: &mut TensorProto, init: Init, seed: u64, index: usize) {
    let n: usize = tensor.dims.iter().map(|&d| d.max(0) as usize).product();
    let values: Vec<f32> = match init {
        Init::Constant(v) => vec![v; n],
        Init::Glorot { fan_in, fan_out } => {
            let limit = (6.0 / (fan_in + fan_out).max(1) as f64).sqrt();
            let mut rng = rng_for(seed, &[index as u64]);
            (0..n).map(|_| rng.random_range(-limit..limit) as f32).collect()
        }
    };
    tensor.float_data.clear();
    tensor.double_data.clear();
    tensor.raw_data = Some(values.iter().flat_map(|v| v.to_le_bytes()).collect());
}

/// Re-draws every learned parameter of the graph at `path_in` and writes the
/// result to `path_out`: Glorot-uniform for convolution and dense kernels,
/// zeros for biases and norm shifts/means, ones for norm scales/variances.
/// Topology, names and shapes are untouched and the output is a pure
/// function of the input bytes and `seed`. A sidecar is written next to the
/// output when the input has one.
pub fn randomize_weights(path_in: impl AsRef<Path>, path_out: impl AsRef<Path>, seed: u64) -> Result<LayerManifest> {
    let (path_in, path_out) = (path_in.as_ref(), path_out.as_ref());
    let (original, manifest) = super::load_graph(path_in)?;
    let bytes = std::fs::read(path_in)?;
    let mut model = ModelProto::decode(bytes.as_slice()).map_err(|e| DeepError::Malformed(e.to_string()))?;
    let graph = model
        .graph
        .as_mut()
        .ok_or_else(|| DeepError::Malformed("model has no graph".into()))?;
    let roles = roles(graph);
    for (k, tensor) in graph.initializer.iter_mut().enumerate() {
        if let Some(&init) = tensor.name.as_ref().and_then(|n| roles.get(n)) {
            redraw(tensor, init, seed, k);
        }
    }
    let hash = weights_hash(graph)?;
    let out = model.encode_to_vec();
    // re-deriving the manifest against the original proves topology survived
    let expected = Sidecar {
        manifest: manifest.clone(),
        weights_hash: Some(hash),
        preprocess: Some(original.preprocess()),
    };
    let stem = path_out
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    GraphHandle::from_bytes(&out, &stem, Some(&expected))?;
    std::fs::write(path_out, &out)?;
    if Sidecar::path_for(path_in).exists() {
        expected.save(&Sidecar::path_for(path_out))?;
    }
    Ok(manifest)
}
