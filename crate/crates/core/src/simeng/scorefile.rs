use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{Result, ScoreError, ScoreSet};
use crate::binio;

const MAGIC: &[u8; 8] = b"PSCSCOR1";

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ScoreMeta {
    pub descriptor: String,
    pub partition: String,
    pub genuine_count: u64,
    pub impostor_count: u64,
}

impl ScoreSet {
    /// Header, then genuine scores, then impostor scores, as little-endian `f32`.
    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut meta = self.meta.clone();
        meta.genuine_count = self.genuine.len() as u64;
        meta.impostor_count = self.impostor.len() as u64;
        let mut w = BufWriter::new(File::create(path)?);
        binio::write_header(&mut w, MAGIC, &meta)?;
        binio::write_f32s(&mut w, self.genuine.iter().chain(&self.impostor).map(|&s| s as f32))?;
        w.flush()?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let malformed = |e: &dyn std::fmt::Display| ScoreError::Malformed {
            path: path.display().to_string(),
            message: e.to_string(),
        };
        let mut r = BufReader::new(File::open(path)?);
        let meta: ScoreMeta = binio::read_header(&mut r, MAGIC).map_err(|e| malformed(&e))?;
        let g = meta.genuine_count as usize;
        let scores = binio::read_f32s(&mut r, g + meta.impostor_count as usize).map_err(|e| malformed(&e))?;
        if r.read(&mut [0u8; 1])? != 0 {
            return Err(malformed(&"trailing bytes"));
        }
        if let Some(v) = scores.iter().find(|v| !v.is_finite()) {
            return Err(malformed(&format!("non-finite score {v}")));
        }
        let mut genuine: Vec<f64> = scores.into_iter().map(f64::from).collect();
        let impostor = genuine.split_off(g);
        Ok(Self {
            genuine,
            impostor,
            meta,
        })
    }
}
