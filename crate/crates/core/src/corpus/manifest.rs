use std::collections::{BTreeSet, HashSet};
use std::fs::File;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{CorpusError, Identity, Result, SampleRecord, ScleraAnnotation};

const HEADER: [&str; 10] = [
    "sample_id",
    "subject_id",
    "eye",
    "session",
    "image_path",
    "sclera_cx",
    "sclera_cy",
    "sclera_r",
    "orientation",
    "distance_group",
];

#[derive(Debug, Deserialize, Serialize)]
struct Row {
    sample_id: String,
    subject_id: String,
    eye: String,
    session: u32,
    image_path: String,
    sclera_cx: Option<f64>,
    sclera_cy: Option<f64>,
    sclera_r: Option<f64>,
    orientation: Option<f64>,
    distance_group: Option<u32>,
}

/// Records loaded from a manifest. Relative image paths are resolved against
/// the manifest's directory.
#[derive(Debug, Clone, Default)]
pub struct Manifest {
    pub records: Vec<SampleRecord>,
    /// Sample ids whose image file does not exist.
    pub missing_images: Vec<String>,
}

impl Manifest {
    pub fn identities(&self) -> BTreeSet<Identity> {
        self.records.iter().map(SampleRecord::identity).collect()
    }

    pub fn identity_count(&self) -> usize {
        self.identities().len()
    }
}

pub fn load_manifest(path: impl AsRef<Path>) -> Result<Manifest> {
    let path = path.as_ref();
    let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
    let display = path.display().to_string();
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| match e.kind() {
            csv::ErrorKind::Io(_) => CorpusError::Io(std::io::Error::other(format!("{display}: {e}"))),
            _ => parse_error(&display, 1, e.to_string()),
        })?;

    let headers = reader.headers().map_err(|e| parse_error(&display, 1, e.to_string()))?;
    if headers.iter().ne(HEADER.iter().copied()) {
        return Err(parse_error(
            &display,
            1,
            format!("header must be `{}`", HEADER.join(",")),
        ));
    }

    let mut seen = HashSet::new();
    let mut manifest = Manifest::default();
    for row in reader.deserialize::<Row>() {
        let row = row.map_err(|e| {
            let line = e.position().map(|p| p.line()).unwrap_or(0);
            parse_error(&display, line, e.to_string())
        })?;
        let line = manifest.records.len() as u64 + 2;
        let record = row_to_record(row, &base).map_err(|m| parse_error(&display, line, m))?;
        if !seen.insert(record.sample_id.clone()) {
            return Err(CorpusError::DuplicateId(record.sample_id));
        }
        if !record.image_path.exists() {
            log::warn!(
                "sample `{}`: image {} not found",
                record.sample_id,
                record.image_path.display()
            );
            manifest.missing_images.push(record.sample_id.clone());
        }
        manifest.records.push(record);
    }
    Ok(manifest)
}

fn parse_error(path: &str, line: u64, message: String) -> CorpusError {
    CorpusError::Parse {
        path: path.to_string(),
        line,
        message,
    }
}

fn row_to_record(row: Row, base: &Path) -> std::result::Result<SampleRecord, String> {
    if row.sample_id.is_empty() {
        return Err("empty sample_id".into());
    }
    if row.subject_id.is_empty() {
        return Err("empty subject_id".into());
    }
    let eye = row.eye.parse()?;
    let sclera = match (row.sclera_cx, row.sclera_cy, row.sclera_r) {
        (Some(center_x), Some(center_y), Some(radius)) => Some(ScleraAnnotation {
            center_x,
            center_y,
            radius,
            orientation: row.orientation.unwrap_or(0.0),
        }),
        (None, None, None) => None,
        _ => return Err("sclera_cx, sclera_cy and sclera_r must be given together".into()),
    };
    let image_path = PathBuf::from(&row.image_path);
    let image_path = if image_path.is_relative() {
        base.join(image_path)
    } else {
        image_path
    };
    Ok(SampleRecord {
        sample_id: row.sample_id,
        subject_id: row.subject_id,
        eye,
        session: row.session,
        image_path,
        sclera,
        distance_group: row.distance_group,
    })
}

/// Writes records as a manifest. Image paths under `dir` of the manifest are
/// written relative to it.
pub fn write_manifest(path: impl AsRef<Path>, records: &[SampleRecord]) -> Result<()> {
    let path = path.as_ref();
    let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
    let mut out = Vec::new();
    writeln!(out, "{}", HEADER.join(","))?;
    {
        let mut writer = csv::WriterBuilder::new()
            .has_headers(false)
            .terminator(csv::Terminator::Any(b'\n'))
            .from_writer(&mut out);
        for r in records {
            let image_path = r.image_path.strip_prefix(&base).unwrap_or(&r.image_path);
            let row = Row {
                sample_id: r.sample_id.clone(),
                subject_id: r.subject_id.clone(),
                eye: r.eye.as_str().to_string(),
                session: r.session,
                image_path: image_path.to_string_lossy().into_owned(),
                sclera_cx: r.sclera.map(|s| s.center_x),
                sclera_cy: r.sclera.map(|s| s.center_y),
                sclera_r: r.sclera.map(|s| s.radius),
                orientation: r.sclera.map(|s| s.orientation),
                distance_group: r.distance_group,
            };
            writer
                .serialize(row)
                .map_err(|e| CorpusError::Io(std::io::Error::other(e)))?;
        }
        writer.flush()?;
    }
    File::create(path)?.write_all(&out)?;
    Ok(())
}
