//! Intermediate-layer features from exported CNN graphs.
//!
//! Graphs are ONNX files whose tappable layers are exposed as graph outputs
//! named `tap/<index>/<name>`, with indices contiguous from 1. A JSON sidecar
//! next to the graph (`model.onnx` -> `model.json`) carries the exporter's
//! [`LayerManifest`]; the loader re-derives the manifest by running a dummy
//! forward pass and rejects a sidecar that disagrees.
//!
//! Inference runs on a small built-in CPU interpreter, one image at a time,
//! so tap values never depend on batch composition. A tap activation of
//! shape `(1, d1, .., dk)` flattens to a vector of length `d1 * .. * dk` in
//! the tensor's own row-major order (for an NCHW graph: channel, row,
//! column); [`unflatten`] is the inverse.

mod graph;
pub mod onnx;
mod ops;
mod randomize;
mod tensor;

pub use graph::{
    load_graph, relative_depth, unflatten, ExtractConfig, GraphHandle, LayerInfo, LayerManifest, LayerRef, Layout,
    Preprocess, Sidecar,
};
pub use randomize::randomize_weights;
pub use tensor::{Tensor, TensorF, Value};

#[derive(Debug, thiserror::Error)]
pub enum DeepError {
    #[error("malformed graph: {0}")]
    Malformed(String),
    #[error("unsupported: {0}")]
    Unsupported(String),
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("layer not found: {0}")]
    LayerNotFound(String),
    #[error("manifest disagrees with graph: {0}")]
    ManifestMismatch(String),
    #[error("{path}: {source}")]
    Json { path: String, source: serde_json::Error },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, DeepError>;
