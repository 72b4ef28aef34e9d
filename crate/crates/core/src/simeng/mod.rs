//! All-against-all scoring.
//!
//! Dense features are compared with cosine similarity accumulated in `f64`;
//! keypoint sets with the SIFT match ratio `M / max(min(K_a, K_b), eps)`.
//! The engine walks pairs tile by tile across a worker pool and writes each
//! score back to its pair-list position, so the output is bit-identical for
//! any worker count or tile size.

mod engine;
mod scorefile;

use serde::{Deserialize, Serialize};

use crate::handfeat::{FeatureVector, MatchStats};

pub use engine::{score_pairs, Features, ScoringConfig};
pub use scorefile::ScoreMeta;

#[derive(Debug, thiserror::Error)]
pub enum ScoreError {
    #[error("dimension mismatch: {0} vs {1}")]
    DimensionMismatch(usize, usize),
    #[error("zero-norm feature vector{}", .0.as_deref().map(|s| format!(" for sample `{s}`")).unwrap_or_default())]
    ZeroNorm(Option<String>),
    #[error("no features for sample `{0}`")]
    MissingFeature(String),
    #[error("malformed score file {path}: {message}")]
    Malformed { path: String, message: String },
    #[error("worker pool: {0}")]
    Pool(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, ScoreError>;

/// Genuine and impostor scores for one experiment cell, each in pair-list order.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreSet {
    pub genuine: Vec<f64>,
    pub impostor: Vec<f64>,
    pub meta: ScoreMeta,
}

pub(crate) fn dot(a: &[f32], b: &[f32]) -> f64 {
    let mut acc = [0f64; 4];
    let (ca, cb) = (a.chunks_exact(4), b.chunks_exact(4));
    let (ra, rb) = (ca.remainder(), cb.remainder());
    for (x, y) in ca.zip(cb) {
        for k in 0..4 {
            acc[k] += x[k] as f64 * y[k] as f64;
        }
    }
    let mut tail = 0f64;
    for (x, y) in ra.iter().zip(rb) {
        tail += *x as f64 * *y as f64;
    }
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}

pub(crate) fn norm(a: &[f32]) -> f64 {
    dot(a, a).sqrt()
}

/// Cosine similarity of two equal-length vectors.
pub fn cosine(v1: &[f32], v2: &[f32]) -> Result<f64> {
    if v1.len() != v2.len() {
        return Err(ScoreError::DimensionMismatch(v1.len(), v2.len()));
    }
    let (n1, n2) = (norm(v1), norm(v2));
    if n1 == 0.0 || n2 == 0.0 {
        return Err(ScoreError::ZeroNorm(None));
    }
    Ok((dot(v1, v2) / (n1 * n2)).clamp(-1.0, 1.0))
}

pub fn cosine_similarity(v1: &FeatureVector, v2: &FeatureVector) -> Result<f64> {
    cosine(&v1.values, &v2.values).map_err(|e| match e {
        ScoreError::ZeroNorm(_) => {
            let id = if norm(&v1.values) == 0.0 {
                &v1.sample_id
            } else {
                &v2.sample_id
            };
            ScoreError::ZeroNorm(Some(id.clone()))
        }
        other => other,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum RatioDenominator {
    /// `max(min(K_a, K_b), eps)`.
    #[default]
    Guarded,
    /// `min(K_a, K_b, eps)` as literally printed; kept for comparison only.
    Literal,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SiftRatioConfig {
    pub epsilon: f64,
    pub denominator: RatioDenominator,
}

impl Default for SiftRatioConfig {
    fn default() -> Self {
        Self {
            epsilon: 1.0,
            denominator: RatioDenominator::Guarded,
        }
    }
}

/// Matches over the (guarded) smaller keypoint count.
pub fn sift_ratio(stats: &MatchStats, cfg: &SiftRatioConfig) -> f64 {
    let smaller = stats.keypoints_a.min(stats.keypoints_b) as f64;
    let denominator = match cfg.denominator {
        RatioDenominator::Guarded => smaller.max(cfg.epsilon),
        RatioDenominator::Literal => smaller.min(cfg.epsilon),
    };
    if stats.matches == 0 || denominator <= 0.0 {
        return 0.0;
    }
    stats.matches as f64 / denominator
}
