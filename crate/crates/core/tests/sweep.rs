use std::path::{Path, PathBuf};

use periscope::corpus::{normalize_image, synth_corpus, NormalizationConfig};
use periscope::deepfeat::{load_graph, GraphHandle, LayerRef};
use periscope::protocol::{enumerate_pairs, make_partition, SplitRule};
use periscope::sweep::{best_layer, emit_report, run_sweep, PartitionLabel, Report, SweepConfig};
use periscope::{NormalizedImage, PairList};

mod common;
use common::{brute_force_eer, cosine};

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(name)
}

struct Setup {
    graph: GraphHandle,
    images: Vec<NormalizedImage>,
    pairs: PairList,
    label: PartitionLabel,
}

fn setup() -> Setup {
    let (graph, _) = load_graph(fixture("toy.onnx")).unwrap();
    let corpus = synth_corpus(12, 3, 0.3, 4).unwrap();
    let cfg = NormalizationConfig {
        output_side: 32,
        target_sclera_radius: 8.0,
        crop_factor: 4.0,
        ..Default::default()
    };
    let images: Vec<_> = corpus
        .records
        .iter()
        .zip(&corpus.images)
        .map(|(r, img)| normalize_image(r, &image::DynamicImage::ImageLuma8(img.clone()), &cfg).unwrap())
        .collect();
    let split = make_partition(&corpus.records, &SplitRule::Complete).unwrap().remove(0);
    Setup {
        graph,
        images,
        pairs: enumerate_pairs(&split),
        label: PartitionLabel::from(&split),
    }
}

/// EER per layer via the full forward pass, plain cosine and the brute-force
/// threshold scan.
fn independent_eers(s: &Setup) -> Vec<f64> {
    let total = s.graph.manifest().total_layers();
    let activations: Vec<_> = s
        .images
        .iter()
        .map(|img| {
            (
                img.sample_id.clone(),
                s.graph.forward_all(s.graph.input_tensor(img).unwrap()).unwrap(),
            )
        })
        .collect();
    (1..=total)
        .map(|layer| {
            let tap = s.graph.tap_value(&LayerRef::Index(layer)).unwrap();
            let values = |id: &str| {
                let (_, acts) = activations.iter().find(|(sid, _)| sid == id).unwrap();
                acts[tap].float().unwrap().data.clone()
            };
            let score = |list: &[(u32, u32)]| -> Vec<f64> {
                list.iter()
                    .map(|&p| {
                        let (a, b) = s.pairs.pair_ids(p);
                        cosine(&values(a), &values(b))
                    })
                    .collect()
            };
            brute_force_eer(&score(&s.pairs.genuine), &score(&s.pairs.impostor))
        })
        .collect()
}

#[test]
fn toy_sweep_matches_independent_pipeline() {
    let s = setup();
    let result = run_sweep(&s.graph, &s.images, &s.pairs, &s.label, &SweepConfig::default()).unwrap();
    assert_eq!(result.rows.len(), 4);
    assert_eq!(result.total_layers, 4);
    let expected = independent_eers(&s);
    for (row, want) in result.rows.iter().zip(&expected) {
        assert!(row.eer < 0.5, "layer {} EER {}", row.layer_index, row.eer);
        assert!(
            (row.eer - want).abs() <= 1e-6,
            "layer {}: {} vs {want}",
            row.layer_index,
            row.eer
        );
        assert_eq!((row.genuine_count, row.impostor_count), (36, 594));
        assert_eq!(row.relative_depth, row.layer_index as f64 / 4.0);
    }
    let (best, rate) = best_layer(&result).unwrap();
    let min = expected.iter().copied().fold(f64::INFINITY, f64::min);
    assert!((rate - min).abs() <= 1e-6);
    assert_eq!(
        best,
        1 + expected.iter().position(|&e| (e - min).abs() <= 1e-12).unwrap()
    );
}

#[test]
fn disk_cache_and_layer_grouping_do_not_change_rows() {
    let s = setup();
    let memory = run_sweep(&s.graph, &s.images, &s.pairs, &s.label, &SweepConfig::default()).unwrap();
    let cache = tempfile::tempdir().unwrap();
    let cfg = SweepConfig {
        cache_dir: Some(cache.path().to_path_buf()),
        layers_per_pass: 3,
        ..Default::default()
    };
    let disk = run_sweep(&s.graph, &s.images, &s.pairs, &s.label, &cfg).unwrap();
    assert_eq!(memory, disk);
    assert_eq!(std::fs::read_dir(cache.path()).unwrap().count(), 0);
}

#[test]
fn strided_refinement_fills_in_around_the_best_layer() {
    let s = setup();
    let full = run_sweep(&s.graph, &s.images, &s.pairs, &s.label, &SweepConfig::default()).unwrap();
    let cfg = SweepConfig {
        stride: 2,
        ..Default::default()
    };
    let coarse = run_sweep(&s.graph, &s.images, &s.pairs, &s.label, &cfg).unwrap();
    let indices: Vec<_> = coarse.rows.iter().map(|r| r.layer_index).collect();
    assert_eq!(indices, [1, 3]);
    let refined = run_sweep(
        &s.graph,
        &s.images,
        &s.pairs,
        &s.label,
        &SweepConfig { refine: true, ..cfg },
    )
    .unwrap();
    let (coarse_best, _) = best_layer(&coarse).unwrap();
    for row in &refined.rows {
        let reference = full.rows.iter().find(|r| r.layer_index == row.layer_index).unwrap();
        assert_eq!(row, reference);
    }
    for i in coarse_best.saturating_sub(1).max(1)..=(coarse_best + 1).min(4) {
        assert!(refined.rows.iter().any(|r| r.layer_index == i), "layer {i} missing");
    }
}

#[test]
fn report_files_carry_every_row() {
    let s = setup();
    let result = run_sweep(&s.graph, &s.images, &s.pairs, &s.label, &SweepConfig::default()).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let files = emit_report(
        dir.path(),
        &Report {
            sweeps: vec![result.clone()],
            transfer: vec![],
        },
    )
    .unwrap();
    let csv = std::fs::read_to_string(&files.sweeps_csv).unwrap();
    assert_eq!(csv.lines().count(), 1 + result.rows.len());
    let json: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&files.json).unwrap()).unwrap();
    let (best, rate) = best_layer(&result).unwrap();
    assert_eq!(json["sweeps"][0]["best"]["layer_index"], best);
    let pct = json["sweeps"][0]["best"]["eer_percent"].as_f64().unwrap();
    assert!((pct - rate * 100.0).abs() < 1e-9);
}
