use std::collections::{HashMap, HashSet};
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use prost::Message;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::onnx::{GraphProto, ModelProto, NodeProto};
use super::ops::{run_node, SUPPORTED};
use super::tensor::{from_proto, Tensor, TensorF, Value};
use super::{DeepError, Result};
use crate::binio::hex;
use crate::corpus::NormalizedImage;
use crate::handfeat::FeatureVector;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LayerInfo {
    pub index: usize,
    pub name: String,
    /// Activation dims without the batch axis.
    pub output_shape: Vec<usize>,
}

impl LayerInfo {
    pub fn feature_len(&self) -> usize {
        self.output_shape.iter().product()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LayerManifest {
    pub model_id: String,
    /// `(height, width, channels)` of the graph input.
    pub input_shape: [usize; 3],
    pub layers: Vec<LayerInfo>,
}

impl LayerManifest {
    pub fn total_layers(&self) -> usize {
        self.layers.len()
    }

    pub fn layer(&self, layer: &LayerRef) -> Result<&LayerInfo> {
        let found = match layer {
            LayerRef::Index(i) => self.layers.get(i.wrapping_sub(1)),
            LayerRef::Name(n) => self.layers.iter().find(|l| &l.name == n),
        };
        found.ok_or_else(|| DeepError::LayerNotFound(format!("{layer} in {}", self.model_id)))
    }
}

/// Maps 8-bit pixels to network input values: `x = pixel * scale + offset`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Preprocess {
    pub scale: f32,
    pub offset: f32,
}

impl Default for Preprocess {
    fn default() -> Self {
        Self {
            scale: 1.0 / 255.0,
            offset: 0.0,
        }
    }
}

/// The exporter's JSON sidecar: a manifest plus optional provenance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sidecar {
    #[serde(flatten)]
    pub manifest: LayerManifest,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub weights_hash: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub preprocess: Option<Preprocess>,
}

impl Sidecar {
    pub fn path_for(graph: &Path) -> PathBuf {
        graph.with_extension("json")
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        serde_json::from_str(&text).map_err(|source| DeepError::Json {
            path: path.display().to_string(),
            source,
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut text = serde_json::to_string_pretty(self).expect("sidecar serializes");
        text.push('\n');
        std::fs::write(path, text)?;
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum LayerRef {
    Index(usize),
    Name(String),
}

impl FromStr for LayerRef {
    type Err = std::convert::Infallible;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        Ok(s.parse()
            .map_or_else(|_| LayerRef::Name(s.to_string()), LayerRef::Index))
    }
}

impl fmt::Display for LayerRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LayerRef::Index(i) => write!(f, "layer {i}"),
            LayerRef::Name(n) => write!(f, "layer `{n}`"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Layout {
    Nchw,
    Nhwc,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExtractConfig {
    /// Images handed to one worker at a time.
    pub batch_size: usize,
}

impl Default for ExtractConfig {
    fn default() -> Self {
        Self { batch_size: 16 }
    }
}

/// A loaded graph. Immutable after loading and safe to share across threads.
#[derive(Debug)]
pub struct GraphHandle {
    model_id: String,
    opset: i64,
    nodes: Vec<NodeProto>,
    initializers: HashMap<String, Value>,
    input_name: String,
    layout: Layout,
    preprocess: Preprocess,
    /// Graph value name of each manifest layer, in manifest order.
    taps: Vec<String>,
    producer: HashMap<String, usize>,
    manifest: LayerManifest,
    weights_hash: String,
}

/// Loads an ONNX graph and its tap manifest, checking the sidecar if present.
pub fn load_graph(path: impl AsRef<Path>) -> Result<(GraphHandle, LayerManifest)> {
    let path = path.as_ref();
    let bytes = std::fs::read(path)?;
    let sidecar_path = Sidecar::path_for(path);
    let sidecar = if sidecar_path.exists() {
        Some(Sidecar::load(&sidecar_path)?)
    } else {
        None
    };
    let stem = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    let handle = GraphHandle::from_bytes(&bytes, &stem, sidecar.as_ref())?;
    let manifest = handle.manifest.clone();
    Ok((handle, manifest))
}

/// Position of a layer along the network, `index / total_layers`.
pub fn relative_depth(layer_index: usize, manifest: &LayerManifest) -> Result<f64> {
    let total = manifest.total_layers();
    if layer_index == 0 || layer_index > total {
        return Err(DeepError::LayerNotFound(format!("layer {layer_index} of {total}")));
    }
    Ok(layer_index as f64 / total as f64)
}

/// Rebuilds the `(1, ..output_shape)` activation a flattened tap came from.
pub fn unflatten(values: &[f32], output_shape: &[usize]) -> Result<TensorF> {
    let mut shape = vec![1];
    shape.extend_from_slice(output_shape);
    Tensor::new(vec![values.len()], values.to_vec()).reshaped(shape)
}

fn parse_tap(name: &str) -> Option<(usize, &str)> {
    let rest = name.strip_prefix("tap/")?;
    let (index, layer) = rest.split_once('/')?;
    let index = index.parse().ok()?;
    (!layer.is_empty()).then_some((index, layer))
}

fn static_dims(graph: &GraphProto, name: &str) -> Result<Vec<Option<usize>>> {
    let info = graph
        .input
        .iter()
        .find(|i| i.name.as_deref() == Some(name))
        .ok_or_else(|| DeepError::Malformed(format!("no graph input `{name}`")))?;
    let shape = info
        .r#type
        .as_ref()
        .and_then(|t| t.tensor_type.as_ref())
        .and_then(|t| t.shape.as_ref())
        .ok_or_else(|| DeepError::Malformed(format!("input `{name}` has no tensor shape")))?;
    Ok(shape
        .dim
        .iter()
        .map(|d| d.dim_value.filter(|&v| v > 0).map(|v| v as usize))
        .collect())
}

/// Kahn's algorithm, stable in the file's node order.
fn topo_sort(nodes: Vec<NodeProto>, available: &HashSet<String>) -> Result<Vec<NodeProto>> {
    let mut producer = HashMap::new();
    for (k, n) in nodes.iter().enumerate() {
        for o in n.output.iter().filter(|o| !o.is_empty()) {
            if available.contains(o) || producer.insert(o.clone(), k).is_some() {
                return Err(DeepError::Malformed(format!("value `{o}` is defined twice")));
            }
        }
    }
    let mut pending = vec![0usize; nodes.len()];
    let mut consumers: Vec<Vec<usize>> = vec![Vec::new(); nodes.len()];
    for (k, n) in nodes.iter().enumerate() {
        for i in n.input.iter().filter(|i| !i.is_empty()) {
            match producer.get(i) {
                Some(&p) => {
                    pending[k] += 1;
                    consumers[p].push(k);
                }
                None if available.contains(i) => {}
                None => return Err(DeepError::Malformed(format!("value `{i}` is never defined"))),
            }
        }
    }
    let mut ready: std::collections::BTreeSet<usize> = (0..nodes.len()).filter(|&k| pending[k] == 0).collect();
    let mut order = Vec::with_capacity(nodes.len());
    while let Some(k) = ready.pop_first() {
        order.push(k);
        for &c in &consumers[k] {
            pending[c] -= 1;
            if pending[c] == 0 {
                ready.insert(c);
            }
        }
    }
    if order.len() != nodes.len() {
        return Err(DeepError::Malformed("graph has a cycle".into()));
    }
    let mut slots: Vec<Option<NodeProto>> = nodes.into_iter().map(Some).collect();
    Ok(order
        .into_iter()
        .map(|k| slots[k].take().expect("each node once"))
        .collect())
}

/// SHA-256 over every initializer in file order: its name, a zero byte, then
/// its values little-endian (`f32` for float tensors, `i64` for integer ones).
pub(crate) fn weights_hash(graph: &GraphProto) -> Result<String> {
    let mut h = Sha256::new();
    for init in &graph.initializer {
        h.update(init.name.as_deref().unwrap_or("").as_bytes());
        h.update([0u8]);
        match from_proto(init)? {
            Value::Float(t) => t.data.iter().for_each(|v| h.update(v.to_le_bytes())),
            Value::Int(t) => t.data.iter().for_each(|v| h.update(v.to_le_bytes())),
        }
    }
    Ok(hex(&h.finalize()))
}

impl GraphHandle {
    pub fn from_bytes(bytes: &[u8], fallback_id: &str, sidecar: Option<&Sidecar>) -> Result<Self> {
        let model = ModelProto::decode(bytes).map_err(|e| DeepError::Malformed(format!("protobuf decode: {e}")))?;
        let opset = model
            .opset_import
            .iter()
            .find(|o| matches!(o.domain.as_deref(), None | Some("") | Some("ai.onnx")))
            .and_then(|o| o.version)
            .ok_or_else(|| DeepError::Malformed("no default-domain opset import".into()))?;
        let graph = model
            .graph
            .ok_or_else(|| DeepError::Malformed("model has no graph".into()))?;
        let hash = weights_hash(&graph)?;
        let mut initializers = HashMap::new();
        for init in &graph.initializer {
            let name = init.name.clone().unwrap_or_default();
            initializers.insert(name, from_proto(init)?);
        }
        let input_name = graph
            .input
            .iter()
            .filter_map(|i| i.name.as_deref())
            .find(|n| !initializers.contains_key(*n))
            .ok_or_else(|| DeepError::Malformed("graph has no data input".into()))?
            .to_string();
        let dims = static_dims(&graph, &input_name)?;
        let (layout, h, w, c) = match dims[..] {
            [_, Some(c @ (1 | 3)), Some(h), Some(w)] => (Layout::Nchw, h, w, c),
            [_, Some(h), Some(w), Some(c @ (1 | 3))] => (Layout::Nhwc, h, w, c),
            _ => {
                return Err(DeepError::Malformed(format!(
                    "input `{input_name}` dims {dims:?}: expected static NCHW or NHWC with 1 or 3 channels"
                )))
            }
        };
        for n in &graph.node {
            let op = n.op_type.as_deref().unwrap_or("");
            if !matches!(n.domain.as_deref(), None | Some("") | Some("ai.onnx")) || !SUPPORTED.contains(&op) {
                return Err(DeepError::Unsupported(format!(
                    "operator `{}{op}` in node `{}`",
                    n.domain
                        .as_deref()
                        .filter(|d| !d.is_empty())
                        .map(|d| format!("{d}."))
                        .unwrap_or_default(),
                    n.name.as_deref().unwrap_or("")
                )));
            }
        }
        let mut available: HashSet<String> = initializers.keys().cloned().collect();
        available.insert(input_name.clone());
        let nodes = topo_sort(graph.node, &available)?;
        let producer = nodes
            .iter()
            .enumerate()
            .flat_map(|(k, n)| n.output.iter().map(move |o| (o.clone(), k)))
            .collect();

        let mut taps: Vec<(usize, String, String)> = graph
            .output
            .iter()
            .filter_map(|o| o.name.as_deref())
            .filter_map(|n| parse_tap(n).map(|(i, layer)| (i, layer.to_string(), n.to_string())))
            .collect();
        if taps.is_empty() {
            return Err(DeepError::Malformed("no `tap/<index>/<name>` outputs".into()));
        }
        taps.sort();
        for (k, (index, ..)) in taps.iter().enumerate() {
            if *index != k + 1 {
                return Err(DeepError::Malformed(format!(
                    "tap indices are not contiguous from 1 (found {index} at position {})",
                    k + 1
                )));
            }
        }

        let model_id = sidecar
            .map(|s| s.manifest.model_id.clone())
            .or_else(|| graph.name.clone().filter(|n| !n.is_empty()))
            .unwrap_or_else(|| fallback_id.to_string());
        let mut handle = Self {
            model_id: model_id.clone(),
            opset,
            nodes,
            initializers,
            input_name,
            layout,
            preprocess: sidecar.and_then(|s| s.preprocess).unwrap_or_default(),
            taps: taps.iter().map(|t| t.2.clone()).collect(),
            producer,
            manifest: LayerManifest {
                model_id,
                input_shape: [h, w, c],
                layers: Vec::new(),
            },
            weights_hash: hash,
        };

        // output shapes come from one forward pass on a blank image
        let blank = Tensor::zeros(handle.input_dims());
        let wanted: Vec<&str> = handle.taps.iter().map(String::as_str).collect();
        let values = handle.run(blank, &wanted)?;
        handle.manifest.layers = taps
            .iter()
            .zip(&values)
            .map(|((index, name, _), v)| {
                if v.shape.first() != Some(&1) {
                    return Err(DeepError::Shape(format!(
                        "tap `{name}` lost the batch axis: {:?}",
                        v.shape
                    )));
                }
                Ok(LayerInfo {
                    index: *index,
                    name: name.clone(),
                    output_shape: v.shape[1..].to_vec(),
                })
            })
            .collect::<Result<_>>()?;

        if let Some(s) = sidecar {
            if s.manifest != handle.manifest {
                let derived = &handle.manifest;
                let detail = if s.manifest.input_shape != derived.input_shape {
                    format!(
                        "input shape {:?} vs derived {:?}",
                        s.manifest.input_shape, derived.input_shape
                    )
                } else if s.manifest.layers.len() != derived.layers.len() {
                    format!("{} layers vs {} derived", s.manifest.layers.len(), derived.layers.len())
                } else {
                    let (a, b) = s
                        .manifest
                        .layers
                        .iter()
                        .zip(&derived.layers)
                        .find(|(a, b)| a != b)
                        .expect("some layer differs");
                    format!("{a:?} vs derived {b:?}")
                };
                return Err(DeepError::ManifestMismatch(detail));
            }
            if let Some(expected) = &s.weights_hash {
                if *expected != handle.weights_hash {
                    return Err(DeepError::ManifestMismatch(format!(
                        "weights hash {expected} vs file {}",
                        handle.weights_hash
                    )));
                }
            }
        }
        Ok(handle)
    }

    pub fn manifest(&self) -> &LayerManifest {
        &self.manifest
    }

    pub fn model_id(&self) -> &str {
        &self.model_id
    }

    pub fn weights_hash(&self) -> &str {
        &self.weights_hash
    }

    pub fn layout(&self) -> Layout {
        self.layout
    }

    pub fn preprocess(&self) -> Preprocess {
        self.preprocess
    }

    pub fn with_preprocess(mut self, preprocess: Preprocess) -> Self {
        self.preprocess = preprocess;
        self
    }

    /// Graph value name backing a manifest layer.
    pub fn tap_value(&self, layer: &LayerRef) -> Result<&str> {
        let info = self.manifest.layer(layer)?;
        Ok(&self.taps[info.index - 1])
    }

    fn input_dims(&self) -> Vec<usize> {
        let [h, w, c] = self.manifest.input_shape;
        match self.layout {
            Layout::Nchw => vec![1, c, h, w],
            Layout::Nhwc => vec![1, h, w, c],
        }
    }

    /// Network input for one grayscale image, replicated across channels.
    pub fn input_tensor(&self, image: &NormalizedImage) -> Result<TensorF> {
        let [h, w, c] = self.manifest.input_shape;
        let (iw, ih) = image.pixels.dimensions();
        if (ih as usize, iw as usize) != (h, w) {
            return Err(DeepError::Shape(format!(
                "image `{}` is {iw}x{ih}, graph `{}` expects {w}x{h}",
                image.sample_id, self.model_id
            )));
        }
        let Preprocess { scale, offset } = self.preprocess;
        let plane: Vec<f32> = image
            .pixels
            .as_raw()
            .iter()
            .map(|&p| p as f32 * scale + offset)
            .collect();
        let data = match self.layout {
            Layout::Nchw => plane.repeat(c),
            Layout::Nhwc => plane.iter().flat_map(|&v| std::iter::repeat_n(v, c)).collect(),
        };
        Ok(Tensor::new(self.input_dims(), data))
    }

    /// Indices (in execution order) of the nodes needed to compute `wanted`.
    fn plan(&self, wanted: &[&str]) -> Result<Vec<usize>> {
        let mut needed = HashSet::new();
        let mut stack: Vec<&str> = wanted.to_vec();
        while let Some(v) = stack.pop() {
            let Some(&k) = self.producer.get(v) else {
                if v == self.input_name || self.initializers.contains_key(v) {
                    continue;
                }
                return Err(DeepError::LayerNotFound(format!("value `{v}`")));
            };
            if needed.insert(k) {
                stack.extend(self.nodes[k].input.iter().filter(|i| !i.is_empty()).map(String::as_str));
            }
        }
        let mut plan: Vec<usize> = needed.into_iter().collect();
        plan.sort_unstable();
        Ok(plan)
    }

    fn execute(&self, input: TensorF, plan: &[usize], keep: impl Fn(&str) -> bool) -> Result<HashMap<String, Value>> {
        let mut uses: HashMap<&str, usize> = HashMap::new();
        for &k in plan {
            for i in &self.nodes[k].input {
                *uses.entry(i.as_str()).or_default() += 1;
            }
        }
        let mut env: HashMap<String, Value> = HashMap::new();
        env.insert(self.input_name.clone(), Value::Float(input));
        for &k in plan {
            let node = &self.nodes[k];
            let outputs = {
                let inputs: Vec<Option<&Value>> = node
                    .input
                    .iter()
                    .map(|i| {
                        if i.is_empty() {
                            None
                        } else {
                            env.get(i).or_else(|| self.initializers.get(i))
                        }
                    })
                    .collect();
                run_node(node, &inputs, self.opset).map_err(|e| match e {
                    DeepError::Shape(m) => {
                        DeepError::Shape(format!("node `{}`: {m}", node.name.as_deref().unwrap_or("")))
                    }
                    other => other,
                })?
            };
            for i in &node.input {
                if let Some(n) = uses.get_mut(i.as_str()) {
                    *n -= 1;
                    if *n == 0 && !keep(i) {
                        env.remove(i);
                    }
                }
            }
            for (name, value) in node.output.iter().zip(outputs) {
                if !name.is_empty() {
                    env.insert(name.clone(), value);
                }
            }
        }
        Ok(env)
    }

    /// Runs only the part of the graph `wanted` depends on and returns those
    /// values in order.
    pub fn run(&self, input: TensorF, wanted: &[&str]) -> Result<Vec<TensorF>> {
        let plan = self.plan(wanted)?;
        let mut env = self.execute(input, &plan, |v| wanted.contains(&v))?;
        wanted
            .iter()
            .map(|w| {
                env.remove(*w)
                    .or_else(|| self.initializers.get(*w).cloned())
                    .ok_or_else(|| DeepError::LayerNotFound(format!("value `{w}`")))?
                    .into_float()
            })
            .collect()
    }

    /// Executes every node and keeps every intermediate value.
    pub fn forward_all(&self, input: TensorF) -> Result<HashMap<String, Value>> {
        let plan: Vec<usize> = (0..self.nodes.len()).collect();
        self.execute(input, &plan, |_| true)
    }

    /// Flattened activations of one layer, one vector per image.
    pub fn extract_tap(
        &self,
        layer: &LayerRef,
        images: &[NormalizedImage],
        cfg: &ExtractConfig,
    ) -> Result<Vec<FeatureVector>> {
        let index = self.manifest.layer(layer)?.index;
        Ok(self.extract_layers(&[index], images, cfg)?.remove(0))
    }

    /// Flattened activations of several layers from one pass per image;
    /// the outer vector follows `layers`.
    pub fn extract_layers(
        &self,
        layers: &[usize],
        images: &[NormalizedImage],
        cfg: &ExtractConfig,
    ) -> Result<Vec<Vec<FeatureVector>>> {
        let infos = layers
            .iter()
            .map(|&i| self.manifest.layer(&LayerRef::Index(i)))
            .collect::<Result<Vec<_>>>()?;
        let wanted: Vec<&str> = infos.iter().map(|l| self.taps[l.index - 1].as_str()).collect();
        let per_image: Vec<Vec<TensorF>> = images
            .par_chunks(cfg.batch_size.max(1))
            .map(|chunk| {
                chunk
                    .iter()
                    .map(|img| self.run(self.input_tensor(img)?, &wanted))
                    .collect::<Result<Vec<_>>>()
            })
            .collect::<Result<Vec<_>>>()?
            .into_iter()
            .flatten()
            .collect();
        let mut out: Vec<Vec<FeatureVector>> = infos.iter().map(|_| Vec::with_capacity(images.len())).collect();
        for (img, values) in images.iter().zip(per_image) {
            for ((info, slot), t) in infos.iter().zip(out.iter_mut()).zip(values) {
                if t.shape[1..] != info.output_shape[..] {
                    return Err(DeepError::Shape(format!(
                        "layer {} produced {:?}, manifest says {:?}",
                        info.index, t.shape, info.output_shape
                    )));
                }
                slot.push(FeatureVector {
                    sample_id: img.sample_id.clone(),
                    values: t.data,
                    source: format!("{}/tap/{}/{}", self.model_id, info.index, info.name),
                });
            }
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn manifest(total: usize) -> LayerManifest {
        LayerManifest {
            model_id: "m".into(),
            input_shape: [4, 4, 3],
            layers: (1..=total)
                .map(|i| LayerInfo {
                    index: i,
                    name: format!("l{i}"),
                    output_shape: vec![i],
                })
                .collect(),
        }
    }

    #[test]
    fn relative_depth_examples() {
        let resnet = manifest(379);
        assert!((relative_depth(195, &resnet).unwrap() - 0.5145).abs() < 1e-4);
        assert_eq!(relative_depth(379, &resnet).unwrap(), 1.0);
        assert!((relative_depth(1, &manifest(26)).unwrap() - 0.0385).abs() < 1e-4);
        assert!(relative_depth(0, &resnet).is_err());
        assert!(relative_depth(380, &resnet).is_err());
    }

    #[test]
    fn tap_names() {
        assert_eq!(parse_tap("tap/3/conv1"), Some((3, "conv1")));
        assert_eq!(parse_tap("tap/12/block/add"), Some((12, "block/add")));
        assert_eq!(parse_tap("tap/x/conv1"), None);
        assert_eq!(parse_tap("tap/3/"), None);
        assert_eq!(parse_tap("logits"), None);
    }

    #[test]
    fn layer_refs() {
        let m = manifest(3);
        assert_eq!("2".parse::<LayerRef>().unwrap(), LayerRef::Index(2));
        assert_eq!(m.layer(&"l3".parse().unwrap()).unwrap().index, 3);
        assert!(matches!(m.layer(&LayerRef::Index(4)), Err(DeepError::LayerNotFound(_))));
        assert!(m.layer(&LayerRef::Index(0)).is_err());
    }

    #[test]
    fn unflatten_inverts_row_major_flatten() {
        let t = unflatten(&(0..24).map(|v| v as f32).collect::<Vec<_>>(), &[2, 3, 4]).unwrap();
        assert_eq!(t.shape, vec![1, 2, 3, 4]);
        // element (c=1, y=2, x=3) sits at 1*12 + 2*4 + 3
        assert_eq!(t.data[12 + 8 + 3], 23.0);
        assert!(unflatten(&[0.0; 5], &[2, 3]).is_err());
    }

    #[test]
    fn corrupted_bytes_are_malformed() {
        let junk: Vec<u8> = (0..200u32).map(|v| (v * 37 % 251) as u8).collect();
        assert!(matches!(
            GraphHandle::from_bytes(&junk, "x", None),
            Err(DeepError::Malformed(_))
        ));
        assert!(matches!(
            GraphHandle::from_bytes(&[], "x", None),
            Err(DeepError::Malformed(_))
        ));
    }
}
