use image::GrayImage;

use super::{BlockHistogramConfig, LbpMapping, Result};

/// Neighbor offsets, clockwise from the top-left.
const NEIGHBORS: [(isize, isize); 8] = [(-1, -1), (0, -1), (1, -1), (1, 0), (1, 1), (0, 1), (-1, 1), (-1, 0)];

/// 8-neighbor, radius-1 local binary pattern at `(x, y)`. Bit `n` is set when
/// the center is strictly brighter than neighbor `n`, so flat regions code 0.
/// The caller guarantees all neighbors are in bounds.
#[inline]
pub fn lbp_code(image: &GrayImage, x: u32, y: u32) -> u8 {
    let center = image.get_pixel(x, y).0[0];
    let mut code = 0u8;
    for (bit, (dx, dy)) in NEIGHBORS.iter().enumerate() {
        let n = image.get_pixel((x as isize + dx) as u32, (y as isize + dy) as u32).0[0];
        if center > n {
            code |= 1 << bit;
        }
    }
    code
}

fn bucket(code: u8, mapping: LbpMapping, bins: usize) -> usize {
    match mapping {
        LbpMapping::Popcount => {
            let level = (code.count_ones() as usize).max(1) - 1;
            level * bins / 8
        }
        LbpMapping::Raw => code as usize * bins / 256,
    }
}

/// Concatenated per-block LBP histograms, blocks in row-major order. Codes
/// are computed on each block's interior (pixels whose 8 neighbors lie in
/// the same block), so every block contributes `(bh - 2) * (bw - 2)` counts.
pub fn lbph_histogram(image: &GrayImage, cfg: &BlockHistogramConfig) -> Result<Vec<f32>> {
    let (bh, bw) = cfg.block_size(image.width(), image.height(), 3)?;
    let mut out = vec![0f32; cfg.dim()];
    for row in 0..cfg.grid_rows {
        for col in 0..cfg.grid_cols {
            let hist = &mut out[(row * cfg.grid_cols + col) * cfg.bins..][..cfg.bins];
            let (y0, x0) = (row * bh, col * bw);
            for y in y0 + 1..y0 + bh - 1 {
                for x in x0 + 1..x0 + bw - 1 {
                    hist[bucket(lbp_code(image, x as u32, y as u32), cfg.lbp_mapping, cfg.bins)] += 1.0;
                }
            }
        }
    }
    Ok(out)
}
