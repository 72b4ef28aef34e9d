//! Hand-crafted baselines: LBPH and HOG block histograms, SIFT keypoints.

mod hog;
mod lbph;
mod matcher;
mod sift;
mod store;

use serde::{Deserialize, Serialize};

use crate::corpus::NormalizedImage;

pub use hog::hog_histogram;
pub use lbph::{lbp_code, lbph_histogram};
pub use matcher::{sift_match, MatchStats, RATIO_TEST};
pub use sift::{sift_keypoints, Keypoint, SiftConfig, DESCRIPTOR_LEN};
pub use store::{FeatureStore, KeypointStore};

#[derive(Debug, thiserror::Error)]
pub enum FeatureError {
    #[error("image {width}x{height} too small for a {rows}x{cols} grid (blocks need at least {min}x{min} pixels)")]
    ImageTooSmall {
        width: u32,
        height: u32,
        rows: usize,
        cols: usize,
        min: usize,
    },
    #[error("invalid descriptor config: {0}")]
    InvalidConfig(String),
    #[error("malformed store {path}: {message}")]
    Malformed { path: String, message: String },
    #[error("store {0}: dimension or descriptor mismatch")]
    Mismatch(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, FeatureError>;

/// How 8-neighbor LBP codes are reduced to histogram bins.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum LbpMapping {
    /// Bucket by the number of set bits. Popcounts 0 and 1 share the first
    /// level, leaving 8 levels that are range-quantized onto `bins`.
    #[default]
    Popcount,
    /// The raw 256-value code, range-quantized onto `bins` (use 256 for the
    /// unreduced histogram).
    Raw,
}

/// Non-overlapping block grid. Remainder pixels beyond the last full block
/// row/column are dropped.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(default)]
pub struct BlockHistogramConfig {
    pub grid_rows: usize,
    pub grid_cols: usize,
    pub bins: usize,
    pub lbp_mapping: LbpMapping,
}

impl Default for BlockHistogramConfig {
    fn default() -> Self {
        Self {
            grid_rows: 8,
            grid_cols: 8,
            bins: 8,
            lbp_mapping: LbpMapping::Popcount,
        }
    }
}

impl BlockHistogramConfig {
    pub fn dim(&self) -> usize {
        self.grid_rows * self.grid_cols * self.bins
    }

    fn validate(&self) -> Result<()> {
        if self.grid_rows == 0 || self.grid_cols == 0 {
            return Err(FeatureError::InvalidConfig("grid must have at least one block".into()));
        }
        if self.bins < 2 {
            return Err(FeatureError::InvalidConfig(format!(
                "bins must be >= 2, got {}",
                self.bins
            )));
        }
        Ok(())
    }

    /// Block height and width for an image, or an error when blocks would be
    /// smaller than `min` pixels on a side.
    fn block_size(&self, width: u32, height: u32, min: usize) -> Result<(usize, usize)> {
        self.validate()?;
        let bh = height as usize / self.grid_rows;
        let bw = width as usize / self.grid_cols;
        if bh < min || bw < min {
            return Err(FeatureError::ImageTooSmall {
                width,
                height,
                rows: self.grid_rows,
                cols: self.grid_cols,
                min,
            });
        }
        Ok((bh, bw))
    }
}

/// A fixed-length embedding for one sample.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureVector {
    pub sample_id: String,
    pub values: Vec<f32>,
    /// `lbph`, `hog` or `tap:<layer>`.
    pub source: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct KeypointSet {
    pub sample_id: String,
    pub keypoints: Vec<Keypoint>,
}

impl KeypointSet {
    pub fn len(&self) -> usize {
        self.keypoints.len()
    }

    pub fn is_empty(&self) -> bool {
        self.keypoints.is_empty()
    }
}

pub fn lbph(image: &NormalizedImage, cfg: &BlockHistogramConfig) -> Result<FeatureVector> {
    Ok(FeatureVector {
        sample_id: image.sample_id.clone(),
        values: lbph_histogram(&image.pixels, cfg)?,
        source: "lbph".into(),
    })
}

pub fn hog(image: &NormalizedImage, cfg: &BlockHistogramConfig) -> Result<FeatureVector> {
    Ok(FeatureVector {
        sample_id: image.sample_id.clone(),
        values: hog_histogram(&image.pixels, cfg)?,
        source: "hog".into(),
    })
}

pub fn sift_detect(image: &NormalizedImage, cfg: &SiftConfig) -> KeypointSet {
    KeypointSet {
        sample_id: image.sample_id.clone(),
        keypoints: sift_keypoints(&image.pixels, cfg),
    }
}
