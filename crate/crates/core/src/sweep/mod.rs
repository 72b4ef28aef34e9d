//! Layer sweeps: EER at every tapped depth, best-layer selection, and
//! transfer of a selected layer to other partitions.

mod report;

use std::collections::HashMap;
use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::corpus::NormalizedImage;
use crate::deepfeat::{DeepError, ExtractConfig, GraphHandle};
use crate::handfeat::{FeatureError, FeatureStore};
use crate::protocol::{PairList, PartitionSpec};
use crate::simeng::{score_pairs, Features, ScoreError, ScoringConfig};
use crate::verimetrics::{eer_of, MetricsError};

pub use report::{emit_report, Report, ReportFiles};

#[derive(Debug, thiserror::Error)]
pub enum SweepError {
    #[error("layer {index} (`{name}`): {message}")]
    Layer {
        index: usize,
        name: String,
        message: String,
    },
    #[error("no image for sample `{0}`")]
    MissingImage(String),
    #[error("invalid sweep: {0}")]
    Invalid(String),
    #[error(transparent)]
    Deep(#[from] DeepError),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, SweepError>;

/// Names the cell of an experiment a sweep belongs to.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PartitionLabel {
    /// e.g. `CW-test`, optionally prefixed by a dataset name.
    pub id: String,
    pub protocol: String,
}

impl From<&PartitionSpec> for PartitionLabel {
    fn from(spec: &PartitionSpec) -> Self {
        Self {
            id: spec.id(),
            protocol: spec.protocol.to_string(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SweepConfig {
    /// First layer index to evaluate (1-based).
    pub first: usize,
    /// Last layer index; `None` means the last manifest layer.
    pub last: Option<usize>,
    pub stride: usize,
    /// After the strided pass, evaluate every skipped layer within
    /// `stride - 1` of the best one.
    pub refine: bool,
    /// Layers pulled out of one forward pass.
    pub layers_per_pass: usize,
    /// When set, each layer's features are spilled here after extraction and
    /// deleted once scored.
    pub cache_dir: Option<PathBuf>,
    /// Report metadata only, e.g. `pretrained` or `random`.
    pub training_strategy: String,
    pub extract: ExtractConfig,
    pub scoring: ScoringConfig,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            first: 1,
            last: None,
            stride: 1,
            refine: false,
            layers_per_pass: 4,
            cache_dir: None,
            training_strategy: "pretrained".into(),
            extract: ExtractConfig::default(),
            scoring: ScoringConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerRow {
    pub layer_index: usize,
    pub layer_name: String,
    pub relative_depth: f64,
    /// Rate in [0, 1].
    pub eer: f64,
    pub genuine_count: usize,
    pub impostor_count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerSweepResult {
    pub model_id: String,
    pub training_strategy: String,
    pub partition: PartitionLabel,
    pub total_layers: usize,
    pub rows: Vec<LayerRow>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransferCell {
    pub model_id: String,
    pub training_strategy: String,
    pub selector: String,
    pub target: String,
    pub layer_index: usize,
    pub layer_name: String,
    pub relative_depth: f64,
    pub eer: f64,
}

/// A partition to evaluate: its label, pairs and normalized images (a
/// superset of the pair table is fine).
pub struct Target<'a> {
    pub label: PartitionLabel,
    pub pairs: &'a PairList,
    pub images: &'a [NormalizedImage],
}

fn pair_images(images: &[NormalizedImage], pairs: &PairList) -> Result<Vec<NormalizedImage>> {
    let by_id: HashMap<&str, &NormalizedImage> = images.iter().map(|i| (i.sample_id.as_str(), i)).collect();
    pairs
        .sample_ids
        .iter()
        .map(|id| {
            by_id
                .get(id.as_str())
                .map(|&i| i.clone())
                .ok_or_else(|| SweepError::MissingImage(id.clone()))
        })
        .collect()
}

fn cache_path(dir: &std::path::Path, model: &str, partition: &str, layer: usize) -> PathBuf {
    let clean = |s: &str| {
        s.chars()
            .map(|c| if c.is_ascii_alphanumeric() || c == '-' { c } else { '_' })
            .collect::<String>()
    };
    dir.join(format!("{}__{}__layer{layer:05}.feat", clean(model), clean(partition)))
}

enum Stored {
    Memory(FeatureStore),
    Disk(PathBuf),
}

/// Extracts, scores and evaluates `layers` (ascending, deduplicated).
fn evaluate(
    graph: &GraphHandle,
    images: &[NormalizedImage],
    pairs: &PairList,
    partition: &str,
    layers: &[usize],
    cfg: &SweepConfig,
) -> Result<Vec<LayerRow>> {
    let manifest = graph.manifest();
    let total = manifest.total_layers();
    let layer_error = |index: usize, message: String| SweepError::Layer {
        index,
        name: manifest.layers[index - 1].name.clone(),
        message,
    };
    let (genuine_count, impostor_count) = pairs.counts();
    let mut rows = Vec::with_capacity(layers.len());
    for group in layers.chunks(cfg.layers_per_pass.max(1)) {
        let features = graph
            .extract_layers(group, images, &cfg.extract)
            .map_err(|e| layer_error(group[0], e.to_string()))?;
        let mut stores = Vec::with_capacity(group.len());
        for (&index, vectors) in group.iter().zip(features) {
            let store = FeatureStore::from_vectors(vectors, graph.weights_hash())
                .map_err(|e| layer_error(index, e.to_string()))?;
            stores.push(match &cfg.cache_dir {
                Some(dir) => {
                    std::fs::create_dir_all(dir)?;
                    let path = cache_path(dir, graph.model_id(), partition, index);
                    store
                        .save(&path)
                        .map_err(|e: FeatureError| layer_error(index, e.to_string()))?;
                    Stored::Disk(path)
                }
                None => Stored::Memory(store),
            });
        }
        for (&index, stored) in group.iter().zip(stores) {
            let store = match stored {
                Stored::Memory(store) => store,
                Stored::Disk(path) => {
                    let store = FeatureStore::load(&path).map_err(|e| layer_error(index, e.to_string()))?;
                    std::fs::remove_file(&path)?;
                    store
                }
            };
            let scores = score_pairs(&Features::Dense(&store), pairs, partition, &cfg.scoring)
                .map_err(|e: ScoreError| layer_error(index, e.to_string()))?;
            let eer = eer_of(&scores).map_err(|e: MetricsError| layer_error(index, e.to_string()))?;
            log::info!("{} {partition} layer {index}/{total}: EER {:.4}", graph.model_id(), eer);
            rows.push(LayerRow {
                layer_index: index,
                layer_name: manifest.layers[index - 1].name.clone(),
                relative_depth: index as f64 / total as f64,
                eer,
                genuine_count,
                impostor_count,
            });
        }
    }
    Ok(rows)
}

/// The layer indices a config selects before any refinement.
pub fn planned_layers(total: usize, cfg: &SweepConfig) -> Result<Vec<usize>> {
    let last = cfg.last.unwrap_or(total);
    if cfg.stride == 0 || cfg.first == 0 || cfg.first > last || last > total {
        return Err(SweepError::Invalid(format!(
            "layers {}..={last} stride {} over {total} layers",
            cfg.first, cfg.stride
        )));
    }
    Ok((cfg.first..=last).step_by(cfg.stride).collect())
}

/// EER at every selected layer of `graph` on one partition.
pub fn run_sweep(
    graph: &GraphHandle,
    images: &[NormalizedImage],
    pairs: &PairList,
    partition: &PartitionLabel,
    cfg: &SweepConfig,
) -> Result<LayerSweepResult> {
    let manifest = graph.manifest();
    let total = manifest.total_layers();
    let planned = planned_layers(total, cfg)?;
    let images = pair_images(images, pairs)?;
    let mut rows = evaluate(graph, &images, pairs, &partition.id, &planned, cfg)?;
    if cfg.refine && cfg.stride > 1 {
        let (best, _) = argmin(&rows).expect("planned layers are nonempty");
        let last = cfg.last.unwrap_or(total);
        let lo = best.saturating_sub(cfg.stride - 1).max(cfg.first);
        let hi = (best + cfg.stride - 1).min(last);
        let extra: Vec<usize> = (lo..=hi).filter(|i| !planned.contains(i)).collect();
        rows.extend(evaluate(graph, &images, pairs, &partition.id, &extra, cfg)?);
        rows.sort_by_key(|r| r.layer_index);
    }
    Ok(LayerSweepResult {
        model_id: graph.model_id().to_string(),
        training_strategy: cfg.training_strategy.clone(),
        partition: partition.clone(),
        total_layers: total,
        rows,
    })
}

fn argmin(rows: &[LayerRow]) -> Option<(usize, f64)> {
    rows.iter()
        .min_by(|a, b| a.eer.total_cmp(&b.eer).then(a.layer_index.cmp(&b.layer_index)))
        .map(|r| (r.layer_index, r.eer))
}

/// Layer with the lowest EER; ties go to the shallower layer.
pub fn best_layer(result: &LayerSweepResult) -> Result<(usize, f64)> {
    argmin(&result.rows).ok_or_else(|| SweepError::Invalid(format!("sweep of {} has no rows", result.partition.id)))
}

/// Evaluates every target at each selector sweep's best layer.
pub fn transfer_matrix(
    selectors: &[LayerSweepResult],
    targets: &[Target<'_>],
    graph: &GraphHandle,
    cfg: &SweepConfig,
) -> Result<Vec<TransferCell>> {
    if selectors.is_empty() || targets.is_empty() {
        return Err(SweepError::Invalid(
            "transfer needs at least one selector and one target".into(),
        ));
    }
    let mut cells = Vec::with_capacity(selectors.len() * targets.len());
    for sweep in selectors {
        let (layer, _) = best_layer(sweep)?;
        for target in targets {
            let images = pair_images(target.images, target.pairs)?;
            let row = evaluate(graph, &images, target.pairs, &target.label.id, &[layer], cfg)?.remove(0);
            cells.push(TransferCell {
                model_id: sweep.model_id.clone(),
                training_strategy: sweep.training_strategy.clone(),
                selector: sweep.partition.id.clone(),
                target: target.label.id.clone(),
                layer_index: layer,
                layer_name: row.layer_name,
                relative_depth: row.relative_depth,
                eer: row.eer,
            });
        }
    }
    Ok(cells)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn result(eers: &[f64]) -> LayerSweepResult {
        LayerSweepResult {
            model_id: "m".into(),
            training_strategy: "pretrained".into(),
            partition: PartitionLabel {
                id: "Complete".into(),
                protocol: "Complete".into(),
            },
            total_layers: eers.len(),
            rows: eers
                .iter()
                .enumerate()
                .map(|(k, &eer)| LayerRow {
                    layer_index: k + 1,
                    layer_name: format!("l{}", k + 1),
                    relative_depth: (k + 1) as f64 / eers.len() as f64,
                    eer,
                    genuine_count: 1,
                    impostor_count: 1,
                })
                .collect(),
        }
    }

    #[test]
    fn best_layer_examples() {
        assert_eq!(best_layer(&result(&[5.0, 2.05, 3.0])).unwrap(), (2, 2.05));
        assert_eq!(best_layer(&result(&[4.0])).unwrap(), (1, 4.0));
        assert_eq!(best_layer(&result(&[1.0, 1.0])).unwrap(), (1, 1.0));
        assert!(best_layer(&result(&[])).is_err());
    }

    #[test]
    fn strided_plans() {
        let cfg = SweepConfig {
            stride: 2,
            ..Default::default()
        };
        assert_eq!(planned_layers(10, &cfg).unwrap(), vec![1, 3, 5, 7, 9]);
        let cfg = SweepConfig {
            first: 2,
            last: Some(4),
            ..Default::default()
        };
        assert_eq!(planned_layers(10, &cfg).unwrap(), vec![2, 3, 4]);
        assert!(planned_layers(3, &cfg).is_err());
        assert!(planned_layers(
            10,
            &SweepConfig {
                stride: 0,
                ..Default::default()
            }
        )
        .is_err());
    }

    #[test]
    fn cache_names_are_path_safe() {
        let p = cache_path(std::path::Path::new("/c"), "res/net", "CW-test", 7);
        assert_eq!(p, PathBuf::from("/c/res_net__CW-test__layer00007.feat"));
    }
}
