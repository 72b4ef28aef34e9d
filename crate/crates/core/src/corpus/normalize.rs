use std::collections::BTreeMap;
use std::path::Path;

use image::{DynamicImage, GrayImage, Luma};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{CorpusError, Result, SampleRecord, ScleraAnnotation};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NormalizationMode {
    /// Rescale to the target sclera radius, rotate, crop around the sclera
    /// center, zero-pad, convert to gray and resize.
    Full,
    /// Convert to gray, center-crop to a square and resize.
    ResizeOnly,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Interpolation {
    Bicubic,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct NormalizationConfig {
    pub target_sclera_radius: f64,
    pub crop_factor: f64,
    pub output_side: u32,
    pub mode: NormalizationMode,
    pub interpolation: Interpolation,
}

impl Default for NormalizationConfig {
    fn default() -> Self {
        Self {
            target_sclera_radius: 30.0,
            crop_factor: 7.6,
            output_side: 224,
            mode: NormalizationMode::Full,
            interpolation: Interpolation::Bicubic,
        }
    }
}

impl NormalizationConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.crop_factor.is_finite() && self.crop_factor > 0.0) {
            return Err(CorpusError::InvalidConfig(format!(
                "crop_factor must be > 0, got {}",
                self.crop_factor
            )));
        }
        if self.output_side == 0 {
            return Err(CorpusError::InvalidConfig("output_side must be > 0".into()));
        }
        if self.mode == NormalizationMode::Full
            && !(self.target_sclera_radius.is_finite() && self.target_sclera_radius > 0.0)
        {
            return Err(CorpusError::InvalidConfig(format!(
                "target_sclera_radius must be > 0, got {}",
                self.target_sclera_radius
            )));
        }
        Ok(())
    }

    /// Side of the square cropped around the sclera center, in rescaled pixels.
    pub fn crop_side(&self) -> f64 {
        self.crop_factor * self.target_sclera_radius
    }

    /// Factor applied to the source image so its sclera radius becomes the target.
    pub fn rescale_factor(&self, annotation: &ScleraAnnotation) -> f64 {
        self.target_sclera_radius / annotation.radius
    }

    pub fn with_target_radius(&self, radius: f64) -> Self {
        Self {
            target_sclera_radius: radius,
            ..self.clone()
        }
    }
}

/// Annotation describing a full-mode output: the sclera sits at the image
/// center with the radius it has after the final resize.
pub fn implied_annotation(cfg: &NormalizationConfig) -> ScleraAnnotation {
    let side = cfg.output_side as f64;
    ScleraAnnotation {
        center_x: (side - 1.0) / 2.0,
        center_y: (side - 1.0) / 2.0,
        radius: cfg.target_sclera_radius * side / cfg.crop_side(),
        orientation: 0.0,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NormalizedImage {
    pub sample_id: String,
    pub pixels: GrayImage,
    pub provenance: NormalizationConfig,
}

impl NormalizedImage {
    pub fn side(&self) -> u32 {
        self.pixels.width()
    }
}

/// Single-channel float image, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct GrayPlane {
    pub width: usize,
    pub height: usize,
    pub data: Vec<f32>,
}

impl GrayPlane {
    #[inline]
    fn at(&self, x: isize, y: isize) -> f32 {
        let x = x.clamp(0, self.width as isize - 1) as usize;
        let y = y.clamp(0, self.height as isize - 1) as usize;
        self.data[y * self.width + x]
    }

    /// Bicubic sample at pixel-index coordinates (pixel centers at integers).
    /// Points outside the image footprint read as zero when `zero_pad` is set,
    /// otherwise they are clamped to the edge.
    fn sample(&self, x: f64, y: f64, zero_pad: bool) -> f32 {
        if zero_pad && (x < -0.5 || y < -0.5 || x > self.width as f64 - 0.5 || y > self.height as f64 - 0.5) {
            return 0.0;
        }
        let x0 = x.floor();
        let y0 = y.floor();
        let wx = cubic_weights(x - x0);
        let wy = cubic_weights(y - y0);
        let (x0, y0) = (x0 as isize, y0 as isize);
        let mut acc = 0.0f64;
        for (j, wyj) in wy.iter().enumerate() {
            let yy = y0 - 1 + j as isize;
            let mut row = 0.0f64;
            for (i, wxi) in wx.iter().enumerate() {
                row += *wxi * self.at(x0 - 1 + i as isize, yy) as f64;
            }
            acc += *wyj * row;
        }
        acc as f32
    }
}

/// Keys cubic convolution weights (a = -0.5) for taps at offsets -1, 0, 1, 2.
fn cubic_weights(t: f64) -> [f64; 4] {
    const A: f64 = -0.5;
    let near = |d: f64| ((A + 2.0) * d - (A + 3.0)) * d * d + 1.0;
    let far = |d: f64| ((A * d - 5.0 * A) * d + 8.0 * A) * d - 4.0 * A;
    [far(1.0 + t), near(t), near(1.0 - t), far(2.0 - t)]
}

/// Luminance with weights (0.299, 0.587, 0.114); alpha is ignored.
pub fn to_gray_f32(image: &DynamicImage) -> GrayPlane {
    let (width, height) = (image.width() as usize, image.height() as usize);
    let data = match image {
        DynamicImage::ImageLuma8(g) => g.as_raw().iter().map(|&v| v as f32).collect(),
        DynamicImage::ImageLumaA8(g) => g.pixels().map(|p| p.0[0] as f32).collect(),
        other => other
            .to_rgb8()
            .pixels()
            .map(|p| {
                let [r, g, b] = p.0;
                (0.299 * r as f64 + 0.587 * g as f64 + 0.114 * b as f64) as f32
            })
            .collect(),
    };
    GrayPlane { width, height, data }
}

pub fn load_image(path: impl AsRef<Path>) -> Result<DynamicImage> {
    let path = path.as_ref();
    image::open(path).map_err(|e| CorpusError::Image {
        path: path.display().to_string(),
        message: e.to_string(),
    })
}

pub fn save_gray_png(path: impl AsRef<Path>, pixels: &GrayImage) -> Result<()> {
    let path = path.as_ref();
    pixels
        .save_with_format(path, image::ImageFormat::Png)
        .map_err(|e| CorpusError::Image {
            path: path.display().to_string(),
            message: e.to_string(),
        })
}

pub fn normalize_image(
    record: &SampleRecord,
    image: &DynamicImage,
    cfg: &NormalizationConfig,
) -> Result<NormalizedImage> {
    cfg.validate()?;
    let plane = to_gray_f32(image);
    if plane.width == 0 || plane.height == 0 {
        return Err(CorpusError::Image {
            path: record.image_path.display().to_string(),
            message: "empty image".into(),
        });
    }
    let side = cfg.output_side;
    let n = side as f64;
    let pixels = match cfg.mode {
        NormalizationMode::Full => {
            let ann = record
                .sclera
                .ok_or_else(|| CorpusError::MissingAnnotation(record.sample_id.clone()))?;
            check_annotation(&record.sample_id, &ann, &plane)?;
            let inv_scale = 1.0 / cfg.rescale_factor(&ann);
            let step = cfg.crop_side() / n;
            let (sin, cos) = ann.orientation.to_radians().sin_cos();
            let mid = (n - 1.0) / 2.0;
            render(side, |u, v| {
                let qx = (u - mid) * step;
                let qy = (v - mid) * step;
                let sx = ann.center_x + (cos * qx - sin * qy) * inv_scale;
                let sy = ann.center_y + (sin * qx + cos * qy) * inv_scale;
                plane.sample(sx, sy, true)
            })
        }
        NormalizationMode::ResizeOnly => {
            let m = plane.width.min(plane.height);
            let off_x = ((plane.width - m) / 2) as f64;
            let off_y = ((plane.height - m) / 2) as f64;
            let step = m as f64 / n;
            render(side, |u, v| {
                plane.sample(off_x + (u + 0.5) * step - 0.5, off_y + (v + 0.5) * step - 0.5, false)
            })
        }
    };
    Ok(NormalizedImage {
        sample_id: record.sample_id.clone(),
        pixels,
        provenance: cfg.clone(),
    })
}

fn check_annotation(sample_id: &str, ann: &ScleraAnnotation, plane: &GrayPlane) -> Result<()> {
    let fail = |message: String| CorpusError::DegenerateAnnotation {
        sample_id: sample_id.to_string(),
        message,
    };
    if !(ann.radius.is_finite() && ann.radius > 0.0) {
        return Err(fail(format!("radius {} is not positive", ann.radius)));
    }
    if !ann.orientation.is_finite() {
        return Err(fail("orientation is not finite".into()));
    }
    let inside = |c: f64, len: usize| c.is_finite() && c >= 0.0 && c <= (len - 1) as f64;
    if !inside(ann.center_x, plane.width) || !inside(ann.center_y, plane.height) {
        return Err(fail(format!(
            "center ({}, {}) outside {}x{} image",
            ann.center_x, ann.center_y, plane.width, plane.height
        )));
    }
    Ok(())
}

fn render(side: u32, f: impl Fn(f64, f64) -> f32) -> GrayImage {
    GrayImage::from_fn(side, side, |u, v| {
        Luma([f(u as f64, v as f64).round().clamp(0.0, 255.0) as u8])
    })
}

/// Loads an image that an earlier run already normalized: it is converted to
/// gray and must be square. The provenance records a resize-only pass at the
/// image's own side, since the original settings are not stored with it.
pub fn load_normalized(record: &SampleRecord) -> Result<NormalizedImage> {
    let pixels = load_image(&record.image_path)?.to_luma8();
    let (w, h) = pixels.dimensions();
    if w != h || w == 0 {
        return Err(CorpusError::Image {
            path: record.image_path.display().to_string(),
            message: format!("{w}x{h} is not a normalized square image"),
        });
    }
    Ok(NormalizedImage {
        sample_id: record.sample_id.clone(),
        pixels,
        provenance: NormalizationConfig {
            output_side: w,
            mode: NormalizationMode::ResizeOnly,
            ..Default::default()
        },
    })
}

/// Normalizes records in parallel. Output order follows `records`.
pub fn normalize_batch(
    records: &[SampleRecord],
    images: &[DynamicImage],
    cfg: &NormalizationConfig,
) -> Result<Vec<NormalizedImage>> {
    if records.len() != images.len() {
        return Err(CorpusError::InvalidArgument(format!(
            "{} records but {} images",
            records.len(),
            images.len()
        )));
    }
    records
        .par_iter()
        .zip(images.par_iter())
        .map(|(r, img)| normalize_image(r, img, cfg))
        .collect()
}

/// How sclera radii are pooled when averaging per distance group.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RadiusScope {
    Global,
    PerSession,
}

/// Mean annotated sclera radius per `(distance_group, session)` key. The
/// session component is `None` for [`RadiusScope::Global`]. Records without
/// an annotation are skipped.
pub fn distance_group_radii(records: &[SampleRecord], scope: RadiusScope) -> BTreeMap<(Option<u32>, Option<u32>), f64> {
    let mut sums: BTreeMap<(Option<u32>, Option<u32>), (f64, usize)> = BTreeMap::new();
    for r in records {
        let Some(ann) = r.sclera else { continue };
        let key = (
            r.distance_group,
            match scope {
                RadiusScope::Global => None,
                RadiusScope::PerSession => Some(r.session),
            },
        );
        let e = sums.entry(key).or_default();
        e.0 += ann.radius;
        e.1 += 1;
    }
    sums.into_iter().map(|(k, (s, n))| (k, s / n as f64)).collect()
}
