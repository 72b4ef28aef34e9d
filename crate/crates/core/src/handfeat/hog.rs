use image::GrayImage;

use super::{BlockHistogramConfig, Result};

/// Concatenated per-block histograms of unsigned gradient orientation in
/// [0, 180) degrees, weighted by gradient magnitude. Gradients are central
/// differences over the whole image, one-sided at the borders.
pub fn hog_histogram(image: &GrayImage, cfg: &BlockHistogramConfig) -> Result<Vec<f32>> {
    let (bh, bw) = cfg.block_size(image.width(), image.height(), 1)?;
    let (w, h) = (image.width() as usize, image.height() as usize);
    let px = |x: usize, y: usize| image.get_pixel(x as u32, y as u32).0[0] as f64;
    let bin_width = 180.0 / cfg.bins as f64;
    let mut out = vec![0f64; cfg.dim()];
    for y in 0..cfg.grid_rows * bh {
        for x in 0..cfg.grid_cols * bw {
            let gx = px((x + 1).min(w - 1), y) - px(x.saturating_sub(1), y);
            let gy = px(x, (y + 1).min(h - 1)) - px(x, y.saturating_sub(1));
            let magnitude = gx.hypot(gy);
            if magnitude == 0.0 {
                continue;
            }
            let angle = gy.atan2(gx).to_degrees().rem_euclid(180.0);
            let bin = ((angle / bin_width) as usize).min(cfg.bins - 1);
            let block = (y / bh) * cfg.grid_cols + x / bw;
            out[block * cfg.bins + bin] += magnitude;
        }
    }
    Ok(out.into_iter().map(|v| v as f32).collect())
}
