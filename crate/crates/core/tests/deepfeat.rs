use std::path::{Path, PathBuf};

use image::GrayImage;
use periscope::deepfeat::onnx::{ModelProto, NodeProto};
use periscope::deepfeat::{
    load_graph, randomize_weights, unflatten, DeepError, ExtractConfig, GraphHandle, LayerRef, Value,
};
use periscope::{NormalizationConfig, NormalizedImage};
use prost::Message;
use serde::Deserialize;

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(name)
}

#[derive(Deserialize)]
struct Reference {
    side: u32,
    pixels: Vec<u8>,
    taps: std::collections::HashMap<String, Vec<f64>>,
}

fn reference(name: &str) -> Reference {
    serde_json::from_str(&std::fs::read_to_string(fixture(name)).unwrap()).unwrap()
}

fn image(id: &str, side: u32, pixels: Vec<u8>) -> NormalizedImage {
    NormalizedImage {
        sample_id: id.into(),
        pixels: GrayImage::from_raw(side, side, pixels).unwrap(),
        provenance: NormalizationConfig::default(),
    }
}

fn noise_image(id: &str, side: u32, seed: u32) -> NormalizedImage {
    let pixels = (0..side * side)
        .map(|i| ((i.wrapping_mul(2_654_435_761) ^ seed.wrapping_mul(40503)) >> 13) as u8)
        .collect();
    image(id, side, pixels)
}

fn max_diff(a: &[f32], b: &[f32]) -> f32 {
    assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f32::max)
}

#[test]
fn toy_manifest_matches_sidecar() {
    let (handle, manifest) = load_graph(fixture("toy.onnx")).unwrap();
    assert_eq!(manifest.model_id, "toy");
    assert_eq!(manifest.input_shape, [32, 32, 3]);
    let names: Vec<_> = manifest.layers.iter().map(|l| l.name.as_str()).collect();
    assert_eq!(names, ["conv1", "relu1", "pool1", "dense1"]);
    assert_eq!(manifest.layers[2].output_shape, vec![4, 16, 16]);
    assert_eq!(handle.manifest(), &manifest);
    assert_eq!(handle.weights_hash().len(), 64);
}

fn check_against_reference(graph: &str, reference_file: &str) {
    let (handle, manifest) = load_graph(fixture(graph)).unwrap();
    let r = reference(reference_file);
    let img = image("ref", r.side, r.pixels);
    for layer in &manifest.layers {
        let got = handle
            .extract_tap(
                &LayerRef::Index(layer.index),
                std::slice::from_ref(&img),
                &ExtractConfig::default(),
            )
            .unwrap();
        let want: Vec<f32> = r.taps[&layer.name].iter().map(|&v| v as f32).collect();
        let diff = max_diff(&got[0].values, &want);
        assert!(diff < 1e-4, "{graph} layer {}: max abs diff {diff}", layer.name);
    }
}

#[test]
fn toy_taps_match_numpy_reference() {
    check_against_reference("toy.onnx", "toy_reference.json");
}

#[test]
fn mixed_graph_matches_numpy_reference() {
    let (handle, manifest) = load_graph(fixture("mixed.onnx")).unwrap();
    assert_eq!(handle.layout(), periscope::deepfeat::Layout::Nhwc);
    assert_eq!(manifest.total_layers(), 8);
    assert_eq!(handle.preprocess().offset, -1.0);
    check_against_reference("mixed.onnx", "mixed_reference.json");
}

/// Written by the Python exporter from a torch model; the reference values
/// come from torch forward hooks.
#[test]
fn exporter_output_loads_and_matches_torch() {
    let (handle, manifest) = load_graph(fixture("exported_toy.onnx")).unwrap();
    let sidecar: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(fixture("exported_toy.json")).unwrap()).unwrap();
    assert_eq!(sidecar["weights_hash"], handle.weights_hash());
    let names: Vec<_> = manifest.layers.iter().map(|l| l.name.as_str()).collect();
    assert_eq!(names, ["conv1", "relu1", "pool1", "dense1"]);
    check_against_reference("exported_toy.onnx", "exported_toy_reference.json");
}

#[test]
fn truncated_execution_matches_full_forward() {
    for graph in ["toy.onnx", "mixed.onnx"] {
        let (handle, manifest) = load_graph(fixture(graph)).unwrap();
        let side = manifest.input_shape[0] as u32;
        let img = noise_image("a", side, 3);
        let all = handle.forward_all(handle.input_tensor(&img).unwrap()).unwrap();
        for layer in &manifest.layers {
            let tapped = handle
                .extract_tap(
                    &LayerRef::Name(layer.name.clone()),
                    std::slice::from_ref(&img),
                    &ExtractConfig::default(),
                )
                .unwrap();
            let Value::Float(full) = &all[handle.tap_value(&LayerRef::Index(layer.index)).unwrap()] else {
                panic!()
            };
            assert_eq!(tapped[0].values.len(), layer.feature_len());
            assert!(max_diff(&tapped[0].values, &full.data) <= 1e-5);
            let restored = unflatten(&tapped[0].values, &layer.output_shape).unwrap();
            assert_eq!(restored.shape, full.shape);
        }
    }
}

#[test]
fn extraction_is_batch_invariant() {
    let (handle, _) = load_graph(fixture("toy.onnx")).unwrap();
    let images: Vec<_> = (0..7).map(|k| noise_image(&format!("s{k}"), 32, k)).collect();
    let layer = LayerRef::Index(3);
    let alone = handle
        .extract_tap(&layer, &images[4..5], &ExtractConfig::default())
        .unwrap();
    for batch_size in [1, 3, 16] {
        let all = handle
            .extract_tap(&layer, &images, &ExtractConfig { batch_size })
            .unwrap();
        assert_eq!(all.len(), 7);
        assert_eq!(all[4].sample_id, "s4");
        assert!(max_diff(&all[4].values, &alone[0].values) <= 1e-5);
    }
    let multi = handle
        .extract_layers(&[1, 4], &images[..2], &ExtractConfig::default())
        .unwrap();
    assert_eq!((multi.len(), multi[1][0].values.len()), (2, 8));
    assert_eq!(multi[1][0].source, "toy/tap/4/dense1");
}

#[test]
fn wrong_image_size_is_a_shape_error() {
    let (handle, _) = load_graph(fixture("toy.onnx")).unwrap();
    let err = handle.extract_tap(
        &LayerRef::Index(1),
        &[noise_image("x", 30, 0)],
        &ExtractConfig::default(),
    );
    assert!(matches!(err, Err(DeepError::Shape(_))));
    let err = handle.extract_tap(
        &LayerRef::Index(9),
        &[noise_image("x", 32, 0)],
        &ExtractConfig::default(),
    );
    assert!(matches!(err, Err(DeepError::LayerNotFound(_))));
}

#[test]
fn randomization_keeps_topology_and_replays() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b, c) = (
        dir.path().join("a.onnx"),
        dir.path().join("b.onnx"),
        dir.path().join("c.onnx"),
    );
    let original = load_graph(fixture("toy.onnx")).unwrap();
    let m = randomize_weights(fixture("toy.onnx"), &a, 11).unwrap();
    randomize_weights(fixture("toy.onnx"), &b, 11).unwrap();
    randomize_weights(fixture("toy.onnx"), &c, 12).unwrap();
    assert_eq!(m, original.1);
    let (ra, ma) = load_graph(&a).unwrap();
    assert_eq!(ma, original.1);
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
    assert_ne!(std::fs::read(&a).unwrap(), std::fs::read(&c).unwrap());
    assert_ne!(ra.weights_hash(), original.0.weights_hash());

    let img = noise_image("x", 32, 5);
    let one = |h: &GraphHandle| {
        h.extract_tap(
            &LayerRef::Index(1),
            std::slice::from_ref(&img),
            &ExtractConfig::default(),
        )
        .unwrap()
    };
    assert!(max_diff(&one(&ra)[0].values, &one(&original.0)[0].values) > 0.0);

    // node list, names and initializer shapes are unchanged
    let decode = |p: &Path| {
        ModelProto::decode(std::fs::read(p).unwrap().as_slice())
            .unwrap()
            .graph
            .unwrap()
    };
    let (before, after) = (decode(&fixture("toy.onnx")), decode(&a));
    assert_eq!(before.node, after.node);
    assert_eq!(before.input, after.input);
    assert_eq!(before.output, after.output);
    let dims = |g: &periscope::deepfeat::onnx::GraphProto| {
        g.initializer
            .iter()
            .map(|t| (t.name.clone(), t.dims.clone()))
            .collect::<Vec<_>>()
    };
    assert_eq!(dims(&before), dims(&after));
}

#[test]
fn corrupted_graph_is_malformed() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.onnx");
    let mut bytes = std::fs::read(fixture("toy.onnx")).unwrap();
    bytes.truncate(bytes.len() / 2);
    std::fs::write(&path, &bytes).unwrap();
    assert!(matches!(load_graph(&path), Err(DeepError::Malformed(_))));
}

#[test]
fn disagreeing_sidecar_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("toy.onnx");
    std::fs::copy(fixture("toy.onnx"), &path).unwrap();
    let text = std::fs::read_to_string(fixture("toy.json"))
        .unwrap()
        .replace("\"pool1\"", "\"pool2\"");
    std::fs::write(dir.path().join("toy.json"), text).unwrap();
    assert!(matches!(load_graph(&path), Err(DeepError::ManifestMismatch(_))));
    // without a sidecar the manifest is derived from the graph alone
    std::fs::remove_file(dir.path().join("toy.json")).unwrap();
    assert_eq!(load_graph(&path).unwrap().1.layers[2].name, "pool1");
}

#[test]
fn unsupported_operator_is_reported() {
    let mut model = ModelProto::decode(std::fs::read(fixture("toy.onnx")).unwrap().as_slice()).unwrap();
    let graph = model.graph.as_mut().unwrap();
    graph.node[1] = NodeProto {
        op_type: Some("Einsum".into()),
        ..graph.node[1].clone()
    };
    let err = GraphHandle::from_bytes(&model.encode_to_vec(), "toy", None).unwrap_err();
    assert!(
        matches!(err, DeepError::Unsupported(ref m) if m.contains("Einsum")),
        "{err}"
    );
}
