use std::collections::HashMap;
use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{FeatureError, FeatureVector, Keypoint, KeypointSet, Result, DESCRIPTOR_LEN};
use crate::binio;

const FEATURE_MAGIC: &[u8; 8] = b"PSCFEAT1";
const KEYPOINT_MAGIC: &[u8; 8] = b"PSCKPTS1";

#[derive(Serialize, Deserialize)]
struct FeatureHeader {
    descriptor: String,
    dim: usize,
    config_hash: String,
    sample_ids: Vec<String>,
}

/// Row-per-sample matrix of fixed-length features.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureStore {
    pub descriptor: String,
    pub dim: usize,
    pub config_hash: String,
    pub sample_ids: Vec<String>,
    pub data: Vec<f32>,
    index: HashMap<String, usize>,
}

impl FeatureStore {
    pub fn new(descriptor: impl Into<String>, dim: usize, config_hash: impl Into<String>) -> Self {
        Self {
            descriptor: descriptor.into(),
            dim,
            config_hash: config_hash.into(),
            sample_ids: Vec::new(),
            data: Vec::new(),
            index: HashMap::new(),
        }
    }

    pub fn from_vectors(vectors: Vec<FeatureVector>, config_hash: impl Into<String>) -> Result<Self> {
        let dim = vectors.first().map_or(0, |v| v.values.len());
        let descriptor = vectors.first().map_or_else(String::new, |v| v.source.clone());
        let mut store = Self::new(descriptor, dim, config_hash);
        for v in vectors {
            store.push(&v.sample_id, &v.values)?;
        }
        Ok(store)
    }

    pub fn push(&mut self, sample_id: &str, values: &[f32]) -> Result<()> {
        if values.len() != self.dim {
            return Err(FeatureError::Mismatch(format!(
                "{sample_id}: {} values, store dimension {}",
                values.len(),
                self.dim
            )));
        }
        if self
            .index
            .insert(sample_id.to_string(), self.sample_ids.len())
            .is_some()
        {
            return Err(FeatureError::Mismatch(format!("duplicate sample `{sample_id}`")));
        }
        self.sample_ids.push(sample_id.to_string());
        self.data.extend_from_slice(values);
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.sample_ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sample_ids.is_empty()
    }

    pub fn row(&self, i: usize) -> &[f32] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn index_of(&self, sample_id: &str) -> Option<usize> {
        self.index.get(sample_id).copied()
    }

    pub fn get(&self, sample_id: &str) -> Option<&[f32]> {
        self.index_of(sample_id).map(|i| self.row(i))
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut w = BufWriter::new(File::create(path)?);
        let header = FeatureHeader {
            descriptor: self.descriptor.clone(),
            dim: self.dim,
            config_hash: self.config_hash.clone(),
            sample_ids: self.sample_ids.clone(),
        };
        binio::write_header(&mut w, FEATURE_MAGIC, &header)?;
        binio::write_f32s(&mut w, self.data.iter().copied())?;
        w.flush()?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let mut r = BufReader::new(File::open(path)?);
        let header: FeatureHeader = binio::read_header(&mut r, FEATURE_MAGIC).map_err(|e| malformed(path, e))?;
        let data = binio::read_f32s(&mut r, header.dim * header.sample_ids.len()).map_err(|e| malformed(path, e))?;
        expect_eof(&mut r, path)?;
        let mut store = Self::new(header.descriptor, header.dim, header.config_hash);
        for (i, id) in header.sample_ids.into_iter().enumerate() {
            store.push(&id, &data[i * header.dim..(i + 1) * header.dim])?;
        }
        Ok(store)
    }
}

fn malformed(path: &Path, e: impl std::fmt::Display) -> FeatureError {
    FeatureError::Malformed {
        path: path.display().to_string(),
        message: e.to_string(),
    }
}

fn expect_eof(r: &mut impl Read, path: &Path) -> Result<()> {
    let mut probe = [0u8; 1];
    if r.read(&mut probe)? != 0 {
        return Err(malformed(path, "trailing bytes"));
    }
    Ok(())
}

#[derive(Serialize, Deserialize)]
struct KeypointHeader {
    config_hash: String,
    sample_ids: Vec<String>,
}

/// Keypoint sets for many samples. On disk, each set is a `u32` count then
/// per keypoint `x, y, scale, orientation` and the 128 descriptor values,
/// all little-endian `f32`. Responses are not stored.
#[derive(Debug, Clone, PartialEq)]
pub struct KeypointStore {
    pub config_hash: String,
    pub sets: Vec<KeypointSet>,
    index: HashMap<String, usize>,
}

impl KeypointStore {
    pub fn new(config_hash: impl Into<String>, sets: Vec<KeypointSet>) -> Result<Self> {
        let mut index = HashMap::with_capacity(sets.len());
        for (i, s) in sets.iter().enumerate() {
            if index.insert(s.sample_id.clone(), i).is_some() {
                return Err(FeatureError::Mismatch(format!("duplicate sample `{}`", s.sample_id)));
            }
        }
        Ok(Self {
            config_hash: config_hash.into(),
            sets,
            index,
        })
    }

    pub fn get(&self, sample_id: &str) -> Option<&KeypointSet> {
        self.index.get(sample_id).map(|&i| &self.sets[i])
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut w = BufWriter::new(File::create(path)?);
        let header = KeypointHeader {
            config_hash: self.config_hash.clone(),
            sample_ids: self.sets.iter().map(|s| s.sample_id.clone()).collect(),
        };
        binio::write_header(&mut w, KEYPOINT_MAGIC, &header)?;
        for set in &self.sets {
            w.write_all(&(set.keypoints.len() as u32).to_le_bytes())?;
            for kp in &set.keypoints {
                binio::write_f32s(
                    &mut w,
                    [kp.x, kp.y, kp.scale, kp.orientation]
                        .into_iter()
                        .chain(kp.descriptor.iter().copied()),
                )?;
            }
        }
        w.flush()?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let mut r = BufReader::new(File::open(path)?);
        let header: KeypointHeader = binio::read_header(&mut r, KEYPOINT_MAGIC).map_err(|e| malformed(path, e))?;
        let mut sets = Vec::with_capacity(header.sample_ids.len());
        for sample_id in header.sample_ids {
            let mut count = [0u8; 4];
            r.read_exact(&mut count).map_err(|e| malformed(path, e))?;
            let count = u32::from_le_bytes(count) as usize;
            let values = binio::read_f32s(&mut r, count * (4 + DESCRIPTOR_LEN)).map_err(|e| malformed(path, e))?;
            let keypoints = values
                .chunks_exact(4 + DESCRIPTOR_LEN)
                .map(|c| Keypoint {
                    x: c[0],
                    y: c[1],
                    scale: c[2],
                    orientation: c[3],
                    response: 0.0,
                    descriptor: c[4..].try_into().expect("chunk length"),
                })
                .collect();
            sets.push(KeypointSet { sample_id, keypoints });
        }
        expect_eof(&mut r, path)?;
        Self::new(header.config_hash, sets)
    }
}
