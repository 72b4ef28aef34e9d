//! Periocular verification toolkit.
//!
//! The crate evaluates one-shot verification performance of intermediate CNN
//! activations and hand-crafted descriptors:
//!
//! * [`corpus`] loads manifests, normalizes images around the sclera and
//!   generates synthetic labeled corpora.
//! * [`protocol`] builds Close-World / Open-World / Complete partitions and
//!   enumerates genuine and impostor pairs.
//! * [`handfeat`] extracts LBPH, HOG and SIFT baselines.
//! * [`deepfeat`] loads ONNX graphs and taps intermediate layers.
//! * [`simeng`] scores all pairs (cosine similarity, SIFT match ratio).
//! * [`verimetrics`] turns scores into FAR/FRR curves and EER.
//! * [`sweep`] evaluates every layer, selects the best one and transfers it
//!   across partitions.

pub mod binio;
pub mod corpus;
pub mod deepfeat;
pub mod handfeat;
pub mod protocol;
pub mod seed;
pub mod simeng;
pub mod sweep;
pub mod verimetrics;

pub use corpus::{Eye, Identity, NormalizationConfig, NormalizedImage, SampleRecord, ScleraAnnotation};
pub use handfeat::{FeatureVector, KeypointSet};
pub use protocol::{PairList, PartitionSpec};
pub use simeng::ScoreSet;
