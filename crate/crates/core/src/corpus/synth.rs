use std::f64::consts::TAU;
use std::path::{Path, PathBuf};

use image::GrayImage;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::seed::rng_for;

use super::{save_gray_png, write_manifest, CorpusError, Eye, Result, SampleRecord, ScleraAnnotation};

/// Side of generated images in pixels.
pub const SYNTH_SIDE: u32 = 128;
/// Sclera radius drawn into every generated image.
pub const SYNTH_SCLERA_RADIUS: f64 = 16.0;

const GRATINGS: usize = 10;
/// Pixel noise standard deviation, in gray levels, at noise level 1.
const PIXEL_NOISE: f64 = 90.0;
/// Sclera-center jitter, in pixels, at noise level 1.
const CENTER_JITTER: f64 = 6.0;
/// Additive smooth illumination amplitude at noise level 1.
const ILLUMINATION: f64 = 40.0;

#[derive(Debug, Clone)]
pub struct SynthCorpus {
    pub records: Vec<SampleRecord>,
    pub images: Vec<GrayImage>,
}

impl SynthCorpus {
    /// Writes `images/<sample_id>.png` and `manifest.csv` under `dir`, and
    /// returns the manifest path.
    pub fn write(&self, dir: impl AsRef<Path>) -> Result<PathBuf> {
        let dir = dir.as_ref();
        std::fs::create_dir_all(dir.join("images"))?;
        let mut records = self.records.clone();
        records.par_iter_mut().zip(&self.images).try_for_each(|(r, img)| {
            r.image_path = dir.join(&r.image_path);
            save_gray_png(&r.image_path, img)
        })?;
        let manifest = dir.join("manifest.csv");
        write_manifest(&manifest, &records)?;
        Ok(manifest)
    }
}

struct Grating {
    amplitude: f64,
    kx: f64,
    ky: f64,
    phase: f64,
}

struct Prototype {
    gratings: Vec<Grating>,
    iris_gray: f64,
}

impl Prototype {
    fn draw(rng: &mut ChaCha8Rng) -> Self {
        let gratings = (0..GRATINGS)
            .map(|_| {
                let freq = rng.random_range(0.04..0.30) * TAU;
                let angle = rng.random_range(0.0..TAU);
                Grating {
                    amplitude: rng.random_range(8.0..24.0),
                    kx: freq * angle.cos(),
                    ky: freq * angle.sin(),
                    phase: rng.random_range(0.0..TAU),
                }
            })
            .collect();
        Self {
            gratings,
            iris_gray: rng.random_range(40.0..90.0),
        }
    }

    /// Gray value at offset (dx, dy) from the sclera center.
    fn value(&self, dx: f64, dy: f64) -> f64 {
        let texture: f64 = self
            .gratings
            .iter()
            .map(|g| g.amplitude * (g.kx * dx + g.ky * dy + g.phase).sin())
            .sum();
        let r = (dx * dx + dy * dy).sqrt();
        // smooth iris disk of the sclera radius
        let iris = 1.0 / (1.0 + ((r - SYNTH_SCLERA_RADIUS) / 1.5).exp());
        let skin = 150.0 + texture;
        skin * (1.0 - iris) + (self.iris_gray + 0.3 * texture) * iris
    }
}

/// Generates a labeled corpus of procedural textures. Identity `i` is
/// subject `i / 2`, eye `i % 2`. Each sample is its identity's prototype with
/// a seeded perturbation (center jitter, illumination field, pixel noise)
/// scaled by `noise_level`; the perturbation draw does not depend on the
/// level, so corpora at different levels differ only in its magnitude.
pub fn synth_corpus(
    n_identities: usize,
    samples_per_identity: usize,
    noise_level: f64,
    seed: u64,
) -> Result<SynthCorpus> {
    if n_identities == 0 || samples_per_identity == 0 {
        return Err(CorpusError::InvalidArgument(
            "identity and sample counts must be at least 1".into(),
        ));
    }
    if !(noise_level.is_finite() && noise_level >= 0.0) {
        return Err(CorpusError::InvalidArgument(format!(
            "noise level must be >= 0, got {noise_level}"
        )));
    }
    let side = SYNTH_SIDE as usize;
    let mid = (side as f64 - 1.0) / 2.0;
    let prototypes: Vec<Prototype> = (0..n_identities)
        .map(|id| Prototype::draw(&mut rng_for(seed, &[1, id as u64])))
        .collect();
    // every sample owns its generator, so parallel order does not matter
    let samples: Vec<(SampleRecord, GrayImage)> = (0..n_identities * samples_per_identity)
        .into_par_iter()
        .map(|n| {
            let (id, k) = (n / samples_per_identity, n % samples_per_identity);
            let proto = &prototypes[id];
            let mut rng = rng_for(seed, &[2, id as u64, k as u64]);
            let jitter_x: f64 = rng.sample(StandardNormal);
            let jitter_y: f64 = rng.sample(StandardNormal);
            let cx = mid + noise_level * CENTER_JITTER * jitter_x.clamp(-2.0, 2.0);
            let cy = mid + noise_level * CENTER_JITTER * jitter_y.clamp(-2.0, 2.0);
            let light_angle = rng.random_range(0.0..TAU);
            let light_phase = rng.random_range(0.0..TAU);
            let (lx, ly) = (light_angle.cos() * TAU / 160.0, light_angle.sin() * TAU / 160.0);
            let mut pixels = Vec::with_capacity(side * side);
            for y in 0..side {
                for x in 0..side {
                    let (xf, yf) = (x as f64, y as f64);
                    let z: f64 = rng.sample(StandardNormal);
                    let light = ILLUMINATION * (lx * xf + ly * yf + light_phase).sin();
                    let v = proto.value(xf - cx, yf - cy) + noise_level * (light + PIXEL_NOISE * z);
                    pixels.push(v.round().clamp(0.0, 255.0) as u8);
                }
            }
            let sample_id = format!("id{id:04}_s{k:02}");
            let image = GrayImage::from_raw(SYNTH_SIDE, SYNTH_SIDE, pixels).expect("buffer size");
            let record = SampleRecord {
                image_path: PathBuf::from("images").join(format!("{sample_id}.png")),
                sample_id,
                subject_id: format!("subj{:04}", id / 2),
                eye: if id % 2 == 0 { Eye::Left } else { Eye::Right },
                session: k as u32,
                sclera: Some(ScleraAnnotation {
                    center_x: cx,
                    center_y: cy,
                    radius: SYNTH_SCLERA_RADIUS,
                    orientation: 0.0,
                }),
                distance_group: None,
            };
            (record, image)
        })
        .collect();
    let (records, images) = samples.into_iter().unzip();
    Ok(SynthCorpus { records, images })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::HashSet;

    fn cosine(a: &[u8], b: &[u8]) -> f64 {
        let (mut d, mut na, mut nb) = (0.0, 0.0, 0.0);
        for (&x, &y) in a.iter().zip(b) {
            let (x, y) = (x as f64, y as f64);
            d += x * y;
            na += x * x;
            nb += y * y;
        }
        d / (na.sqrt() * nb.sqrt())
    }

    #[test]
    fn zero_noise_samples_identical_within_identity() {
        let c = synth_corpus(10, 5, 0.0, 42).unwrap();
        assert_eq!(c.records.len(), 50);
        for id in 0..10 {
            for k in 1..5 {
                assert_eq!(c.images[id * 5], c.images[id * 5 + k]);
            }
        }
        assert_ne!(c.images[0], c.images[5]);
        let identities: HashSet<_> = c.records.iter().map(|r| r.identity()).collect();
        assert_eq!(identities.len(), 10);
    }

    #[test]
    fn deterministic_in_seed() {
        let a = synth_corpus(10, 5, 0.1, 42).unwrap();
        let b = synth_corpus(10, 5, 0.1, 42).unwrap();
        assert_eq!(a.images, b.images);
        assert_eq!(a.records, b.records);
        let c = synth_corpus(10, 5, 0.1, 43).unwrap();
        assert_ne!(a.images, c.images);
    }

    #[test]
    fn more_noise_lowers_genuine_similarity() {
        let low = synth_corpus(2, 2, 0.1, 42).unwrap();
        let high = synth_corpus(2, 2, 1.0, 42).unwrap();
        assert_eq!(high.records.len(), 4);
        for id in 0..2 {
            let l = cosine(low.images[id * 2].as_raw(), low.images[id * 2 + 1].as_raw());
            let h = cosine(high.images[id * 2].as_raw(), high.images[id * 2 + 1].as_raw());
            assert!(h < l, "identity {id}: {h} !< {l}");
        }
    }

    #[test]
    fn annotations_valid() {
        let c = synth_corpus(3, 4, 0.8, 7).unwrap();
        for r in &c.records {
            let s = r.sclera.unwrap();
            assert!(s.radius > 0.0);
            assert!(s.center_x >= 0.0 && s.center_x < SYNTH_SIDE as f64);
            assert!(s.center_y >= 0.0 && s.center_y < SYNTH_SIDE as f64);
        }
    }

    #[test]
    fn rejects_bad_arguments() {
        assert!(synth_corpus(0, 5, 0.1, 1).is_err());
        assert!(synth_corpus(5, 0, 0.1, 1).is_err());
        assert!(synth_corpus(5, 5, -0.1, 1).is_err());
    }
}
