use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{dot, norm, sift_ratio, Result, ScoreError, ScoreMeta, ScoreSet, SiftRatioConfig};
use crate::handfeat::{sift_match, FeatureStore, KeypointSet, KeypointStore};
use crate::protocol::PairList;

/// Pairs handed to a worker at a time.
const CHUNK: usize = 4096;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct ScoringConfig {
    /// Worker threads; 0 means one per logical core.
    pub workers: usize,
    /// Side of the square sample tiles the pair list is walked in.
    pub tile: usize,
}

impl Default for ScoringConfig {
    fn default() -> Self {
        Self { workers: 0, tile: 4096 }
    }
}

pub enum Features<'a> {
    Dense(&'a FeatureStore),
    Keypoints(&'a KeypointStore, SiftRatioConfig),
}

impl Features<'_> {
    fn descriptor(&self) -> String {
        match self {
            Features::Dense(store) => store.descriptor.clone(),
            Features::Keypoints(..) => "sift".to_string(),
        }
    }
}

/// Scores every genuine and impostor pair of `pairs`.
pub fn score_pairs(
    features: &Features<'_>,
    pairs: &PairList,
    partition: &str,
    cfg: &ScoringConfig,
) -> Result<ScoreSet> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.workers)
        .build()
        .map_err(|e| ScoreError::Pool(e.to_string()))?;
    let tile = cfg.tile.max(1);
    let (genuine, impostor) = pool.install(|| -> Result<_> {
        match features {
            Features::Dense(store) => {
                let rows = pairs
                    .sample_ids
                    .iter()
                    .map(|id| store.index_of(id).ok_or_else(|| ScoreError::MissingFeature(id.clone())))
                    .collect::<Result<Vec<_>>>()?;
                let norms: Vec<f64> = rows.par_iter().map(|&r| norm(store.row(r))).collect();
                if let Some(i) = norms.iter().position(|&n| n == 0.0) {
                    if pairs.sample_ids.len() > 1 {
                        return Err(ScoreError::ZeroNorm(Some(pairs.sample_ids[i].clone())));
                    }
                }
                let score = |(a, b): (u32, u32)| {
                    let (a, b) = (a as usize, b as usize);
                    (dot(store.row(rows[a]), store.row(rows[b])) / (norms[a] * norms[b])).clamp(-1.0, 1.0)
                };
                Ok((run(&pairs.genuine, tile, &score), run(&pairs.impostor, tile, &score)))
            }
            Features::Keypoints(store, ratio) => {
                let sets = pairs
                    .sample_ids
                    .iter()
                    .map(|id| store.get(id).ok_or_else(|| ScoreError::MissingFeature(id.clone())))
                    .collect::<Result<Vec<&KeypointSet>>>()?;
                let score = |(a, b): (u32, u32)| sift_ratio(&sift_match(sets[a as usize], sets[b as usize]), ratio);
                Ok((run(&pairs.genuine, tile, &score), run(&pairs.impostor, tile, &score)))
            }
        }
    })?;
    Ok(ScoreSet {
        meta: ScoreMeta {
            descriptor: features.descriptor(),
            partition: partition.to_string(),
            genuine_count: genuine.len() as u64,
            impostor_count: impostor.len() as u64,
        },
        genuine,
        impostor,
    })
}

/// Evaluates `score` on every pair, visiting them tile by tile so both rows of
/// a tile stay hot, and returns the scores in the original pair order.
fn run<F>(pairs: &[(u32, u32)], tile: usize, score: &F) -> Vec<f64>
where
    F: Fn((u32, u32)) -> f64 + Sync,
{
    let tile = tile as u32;
    let mut order: Vec<u32> = (0..pairs.len() as u32).collect();
    order.sort_by_key(|&k| {
        let (a, b) = pairs[k as usize];
        (a / tile, b / tile)
    });
    let chunks: Vec<Vec<f64>> = order
        .par_chunks(CHUNK)
        .map(|chunk| chunk.iter().map(|&k| score(pairs[k as usize])).collect())
        .collect();
    let mut out = vec![0f64; pairs.len()];
    for (chunk, scores) in order.chunks(CHUNK).zip(chunks) {
        for (&k, s) in chunk.iter().zip(scores) {
            out[k as usize] = s;
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::handfeat::FeatureVector;
    use crate::simeng::cosine;
    use rand::{Rng, SeedableRng};

    fn pair_list(n: usize, classes: usize) -> PairList {
        let sample_ids: Vec<String> = (0..n).map(|i| format!("s{i:03}")).collect();
        let (mut genuine, mut impostor) = (Vec::new(), Vec::new());
        for i in 0..n as u32 {
            for j in i + 1..n as u32 {
                if i as usize % classes == j as usize % classes {
                    genuine.push((i, j));
                } else {
                    impostor.push((i, j));
                }
            }
        }
        PairList {
            sample_ids,
            genuine,
            impostor,
        }
    }

    fn store(n: usize, dim: usize, seed: u64) -> FeatureStore {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let vectors = (0..n)
            .map(|i| FeatureVector {
                sample_id: format!("s{i:03}"),
                values: (0..dim).map(|_| rng.random_range(-1.0f32..1.0)).collect(),
                source: "test".into(),
            })
            .collect();
        FeatureStore::from_vectors(vectors, "").unwrap()
    }

    #[test]
    fn blocked_matches_naive_for_any_tiling() {
        let pairs = pair_list(40, 7);
        let store = store(40, 16, 3);
        let naive: Vec<f64> = pairs
            .genuine
            .iter()
            .map(|&(a, b)| cosine(store.row(a as usize), store.row(b as usize)).unwrap())
            .collect();
        for (workers, tile) in [(1, 4096), (2, 3), (8, 1), (3, 16)] {
            let cfg = ScoringConfig { workers, tile };
            let s = score_pairs(&Features::Dense(&store), &pairs, "p", &cfg).unwrap();
            assert_eq!(s.genuine, naive);
            assert_eq!(s.meta.impostor_count as usize, pairs.impostor.len());
        }
    }

    #[test]
    fn missing_feature_names_sample() {
        let pairs = pair_list(5, 2);
        let store = store(4, 3, 1);
        match score_pairs(&Features::Dense(&store), &pairs, "p", &ScoringConfig::default()) {
            Err(ScoreError::MissingFeature(id)) => assert_eq!(id, "s004"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn zero_norm_is_an_error() {
        let pairs = pair_list(3, 2);
        let mut store = store(2, 3, 1);
        store.push("s002", &[0.0; 3]).unwrap();
        assert!(matches!(
            score_pairs(&Features::Dense(&store), &pairs, "p", &ScoringConfig::default()),
            Err(ScoreError::ZeroNorm(Some(id))) if id == "s002"
        ));
    }

    #[test]
    fn keypoint_scores_stay_in_unit_range() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(9);
        let sets = (0..6)
            .map(|i| KeypointSet {
                sample_id: format!("s{i:03}"),
                keypoints: (0..rng.random_range(0..6))
                    .map(|_| {
                        let mut d = [0f32; crate::handfeat::DESCRIPTOR_LEN];
                        d.iter_mut().for_each(|v| *v = rng.random_range(0.0..1.0));
                        crate::handfeat::Keypoint {
                            x: 0.0,
                            y: 0.0,
                            scale: 1.0,
                            orientation: 0.0,
                            response: 0.0,
                            descriptor: d,
                        }
                    })
                    .collect(),
            })
            .collect();
        let store = KeypointStore::new("", sets).unwrap();
        let pairs = pair_list(6, 2);
        let s = score_pairs(
            &Features::Keypoints(&store, SiftRatioConfig::default()),
            &pairs,
            "p",
            &ScoringConfig { workers: 2, tile: 2 },
        )
        .unwrap();
        assert_eq!(s.meta.descriptor, "sift");
        assert!(s.genuine.iter().chain(&s.impostor).all(|v| (0.0..=1.0).contains(v)));
    }
}
