//! Dataset manifests, sclera-based normalization and synthetic corpora.

mod manifest;
mod normalize;
mod synth;

use std::fmt;
use std::path::PathBuf;

use serde::{Deserialize, Serialize};

pub use manifest::{load_manifest, write_manifest, Manifest};
pub use normalize::{
    distance_group_radii, implied_annotation, load_image, load_normalized, normalize_batch, normalize_image,
    save_gray_png, to_gray_f32, GrayPlane, Interpolation, NormalizationConfig, NormalizationMode, NormalizedImage,
    RadiusScope,
};
pub use synth::{synth_corpus, SynthCorpus, SYNTH_SCLERA_RADIUS, SYNTH_SIDE};

#[derive(Debug, thiserror::Error)]
pub enum CorpusError {
    #[error("manifest {path}: line {line}: {message}")]
    Parse { path: String, line: u64, message: String },
    #[error("duplicate sample_id `{0}`")]
    DuplicateId(String),
    #[error("sample `{0}`: full normalization requires a sclera annotation")]
    MissingAnnotation(String),
    #[error("sample `{sample_id}`: degenerate sclera annotation ({message})")]
    DegenerateAnnotation { sample_id: String, message: String },
    #[error("invalid normalization config: {0}")]
    InvalidConfig(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("image {path}: {message}")]
    Image { path: String, message: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, CorpusError>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Eye {
    Left,
    Right,
}

impl Eye {
    pub fn as_str(self) -> &'static str {
        match self {
            Eye::Left => "left",
            Eye::Right => "right",
        }
    }
}

impl std::str::FromStr for Eye {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "left" | "l" => Ok(Eye::Left),
            "right" | "r" => Ok(Eye::Right),
            other => Err(format!("unknown eye `{other}` (expected left or right)")),
        }
    }
}

/// Each eye of a subject is a separate identity.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Identity {
    pub subject_id: String,
    pub eye: Eye,
}

impl fmt::Display for Identity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", self.subject_id, self.eye.as_str())
    }
}

/// Sclera geometry in source-image pixels. `orientation` is in degrees,
/// measured in the pixel frame (x right, y down).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScleraAnnotation {
    pub center_x: f64,
    pub center_y: f64,
    pub radius: f64,
    #[serde(default)]
    pub orientation: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleRecord {
    pub sample_id: String,
    pub subject_id: String,
    pub eye: Eye,
    pub session: u32,
    pub image_path: PathBuf,
    pub sclera: Option<ScleraAnnotation>,
    pub distance_group: Option<u32>,
}

impl SampleRecord {
    pub fn identity(&self) -> Identity {
        Identity {
            subject_id: self.subject_id.clone(),
            eye: self.eye,
        }
    }
}
