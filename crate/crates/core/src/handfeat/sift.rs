//! Difference-of-Gaussians keypoints with 128-value gradient descriptors.
//!
//! The pipeline follows Lowe's detector as implemented by OpenCV: a 2x
//! upsampled seed image, 3 scales per octave at sigma 1.6, sub-pixel
//! refinement of scale-space extrema, contrast (0.04) and edge-ratio (10)
//! rejection, 36-bin orientation histograms with peaks above 80% of the
//! maximum, and 4x4x8 descriptors clamped at 0.2 and renormalized. Pixel
//! values are kept in [0, 255] as in OpenCV's float path.

use std::cmp::Ordering;
use std::f32::consts::PI;

use image::GrayImage;
use serde::{Deserialize, Serialize};

pub const DESCRIPTOR_LEN: usize = 128;

const IMG_BORDER: usize = 5;
const MAX_INTERP_STEPS: usize = 5;
const ORI_HIST_BINS: usize = 36;
const ORI_SIG_FCTR: f32 = 1.5;
const ORI_RADIUS: f32 = 3.0 * ORI_SIG_FCTR;
const ORI_PEAK_RATIO: f32 = 0.8;
const DESCR_WIDTH: usize = 4;
const DESCR_HIST_BINS: usize = 8;
const DESCR_SCL_FCTR: f32 = 3.0;
const DESCR_MAG_THR: f32 = 0.2;
const INIT_SIGMA: f32 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SiftConfig {
    pub octave_layers: usize,
    pub sigma: f32,
    pub contrast_threshold: f32,
    pub edge_threshold: f32,
    /// Keep only the strongest keypoints by response.
    pub max_keypoints: Option<usize>,
}

impl Default for SiftConfig {
    fn default() -> Self {
        Self {
            octave_layers: 3,
            sigma: 1.6,
            contrast_threshold: 0.04,
            edge_threshold: 10.0,
            max_keypoints: None,
        }
    }
}

/// Position and size in input-image pixels; orientation in degrees [0, 360).
#[derive(Debug, Clone, PartialEq)]
pub struct Keypoint {
    pub x: f32,
    pub y: f32,
    pub scale: f32,
    pub orientation: f32,
    pub response: f32,
    pub descriptor: [f32; DESCRIPTOR_LEN],
}

#[derive(Clone)]
struct Plane {
    w: usize,
    h: usize,
    data: Vec<f32>,
}

impl Plane {
    fn zeros(w: usize, h: usize) -> Self {
        Self {
            w,
            h,
            data: vec![0.0; w * h],
        }
    }

    #[inline]
    fn at(&self, x: usize, y: usize) -> f32 {
        self.data[y * self.w + x]
    }
}

/// Reflect-101 border index.
#[inline]
fn reflect(i: isize, n: usize) -> usize {
    let n = n as isize;
    if n == 1 {
        return 0;
    }
    let mut i = i;
    loop {
        if i < 0 {
            i = -i;
        } else if i >= n {
            i = 2 * n - 2 - i;
        } else {
            return i as usize;
        }
    }
}

fn gaussian_kernel(sigma: f32) -> Vec<f32> {
    let size = ((sigma * 8.0 + 1.0).round() as usize) | 1;
    let half = (size / 2) as isize;
    let mut k: Vec<f64> = (-half..=half)
        .map(|i| (-((i * i) as f64) / (2.0 * sigma as f64 * sigma as f64)).exp())
        .collect();
    let sum: f64 = k.iter().sum();
    k.iter_mut().for_each(|v| *v /= sum);
    k.into_iter().map(|v| v as f32).collect()
}

fn blur(src: &Plane, sigma: f32) -> Plane {
    let k = gaussian_kernel(sigma);
    let half = (k.len() / 2) as isize;
    let mut tmp = Plane::zeros(src.w, src.h);
    for y in 0..src.h {
        let row = &src.data[y * src.w..(y + 1) * src.w];
        for x in 0..src.w {
            let mut acc = 0.0f32;
            for (t, kv) in k.iter().enumerate() {
                acc += kv * row[reflect(x as isize + t as isize - half, src.w)];
            }
            tmp.data[y * src.w + x] = acc;
        }
    }
    let mut out = Plane::zeros(src.w, src.h);
    for y in 0..src.h {
        for x in 0..src.w {
            let mut acc = 0.0f32;
            for (t, kv) in k.iter().enumerate() {
                acc += kv * tmp.data[reflect(y as isize + t as isize - half, src.h) * src.w + x];
            }
            out.data[y * src.w + x] = acc;
        }
    }
    out
}

/// Bilinear 2x upsampling with half-pixel centers.
fn upsample2(src: &Plane) -> Plane {
    let (w, h) = (src.w * 2, src.h * 2);
    let mut out = Plane::zeros(w, h);
    let coord = |d: usize, n: usize| {
        let s = ((d as f32 + 0.5) * 0.5 - 0.5).max(0.0);
        let i0 = (s.floor() as usize).min(n - 1);
        let i1 = (i0 + 1).min(n - 1);
        (i0, i1, s - i0 as f32)
    };
    for y in 0..h {
        let (y0, y1, fy) = coord(y, src.h);
        for x in 0..w {
            let (x0, x1, fx) = coord(x, src.w);
            let top = src.at(x0, y0) * (1.0 - fx) + src.at(x1, y0) * fx;
            let bottom = src.at(x0, y1) * (1.0 - fx) + src.at(x1, y1) * fx;
            out.data[y * w + x] = top * (1.0 - fy) + bottom * fy;
        }
    }
    out
}

fn downsample2(src: &Plane) -> Plane {
    let (w, h) = (src.w / 2, src.h / 2);
    let mut out = Plane::zeros(w, h);
    for y in 0..h {
        for x in 0..w {
            out.data[y * w + x] = src.at(2 * x, 2 * y);
        }
    }
    out
}

struct Pyramid {
    gauss: Vec<Vec<Plane>>,
    dog: Vec<Vec<Plane>>,
}

fn build_pyramid(base: Plane, octaves: usize, cfg: &SiftConfig) -> Pyramid {
    let layers = cfg.octave_layers;
    let k = 2f32.powf(1.0 / layers as f32);
    let mut sig = vec![cfg.sigma; layers + 3];
    for (i, s) in sig.iter_mut().enumerate().skip(1) {
        let prev = k.powi(i as i32 - 1) * cfg.sigma;
        let total = prev * k;
        *s = (total * total - prev * prev).sqrt();
    }
    let mut gauss: Vec<Vec<Plane>> = Vec::with_capacity(octaves);
    for o in 0..octaves {
        let first = if o == 0 {
            base.clone()
        } else {
            downsample2(&gauss[o - 1][layers])
        };
        let mut octave = vec![first];
        for s in &sig[1..] {
            let next = blur(octave.last().unwrap(), *s);
            octave.push(next);
        }
        gauss.push(octave);
    }
    let dog = gauss
        .iter()
        .map(|octave| {
            octave
                .windows(2)
                .map(|p| Plane {
                    w: p[0].w,
                    h: p[0].h,
                    data: p[1].data.iter().zip(&p[0].data).map(|(a, b)| a - b).collect(),
                })
                .collect()
        })
        .collect();
    Pyramid { gauss, dog }
}

/// Refined extremum in octave coordinates.
struct Extremum {
    octave: usize,
    layer: usize,
    x: f32,
    y: f32,
    /// Size in octave pixels (diameter).
    size: f32,
    response: f32,
}

fn solve3(h: [[f32; 3]; 3], b: [f32; 3]) -> Option<[f32; 3]> {
    let h = h.map(|r| r.map(|v| v as f64));
    let det = h[0][0] * (h[1][1] * h[2][2] - h[1][2] * h[2][1]) - h[0][1] * (h[1][0] * h[2][2] - h[1][2] * h[2][0])
        + h[0][2] * (h[1][0] * h[2][1] - h[1][1] * h[2][0]);
    if det.abs() < 1e-20 {
        return None;
    }
    let mut out = [0f32; 3];
    for (col, o) in out.iter_mut().enumerate() {
        let mut m = h;
        for r in 0..3 {
            m[r][col] = b[r] as f64;
        }
        let d = m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1]) - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
            + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0]);
        *o = (d / det) as f32;
    }
    Some(out)
}

fn refine(pyr: &Pyramid, octave: usize, layer: usize, x: usize, y: usize, cfg: &SiftConfig) -> Option<Extremum> {
    const IMG_SCALE: f32 = 1.0 / 255.0;
    const DERIV: f32 = IMG_SCALE * 0.5;
    const SECOND: f32 = IMG_SCALE;
    const CROSS: f32 = IMG_SCALE * 0.25;
    let layers = cfg.octave_layers;
    let dogs = &pyr.dog[octave];
    let (w, h) = (dogs[0].w, dogs[0].h);
    let (mut layer, mut x, mut y) = (layer as isize, x as isize, y as isize);
    let mut offset = [0f32; 3];
    let mut converged = false;
    let mut hessian2 = (0f32, 0f32, 0f32);
    for _ in 0..MAX_INTERP_STEPS {
        let (l, c, r) = (layer as usize, x as usize, y as usize);
        let (prev, img, next) = (&dogs[l - 1], &dogs[l], &dogs[l + 1]);
        let d = [
            (img.at(c + 1, r) - img.at(c - 1, r)) * DERIV,
            (img.at(c, r + 1) - img.at(c, r - 1)) * DERIV,
            (next.at(c, r) - prev.at(c, r)) * DERIV,
        ];
        let v2 = img.at(c, r) * 2.0;
        let dxx = (img.at(c + 1, r) + img.at(c - 1, r) - v2) * SECOND;
        let dyy = (img.at(c, r + 1) + img.at(c, r - 1) - v2) * SECOND;
        let dss = (next.at(c, r) + prev.at(c, r) - v2) * SECOND;
        let dxy = (img.at(c + 1, r + 1) - img.at(c - 1, r + 1) - img.at(c + 1, r - 1) + img.at(c - 1, r - 1)) * CROSS;
        let dxs = (next.at(c + 1, r) - next.at(c - 1, r) - prev.at(c + 1, r) + prev.at(c - 1, r)) * CROSS;
        let dys = (next.at(c, r + 1) - next.at(c, r - 1) - prev.at(c, r + 1) + prev.at(c, r - 1)) * CROSS;
        hessian2 = (dxx, dyy, dxy);
        let sol = solve3([[dxx, dxy, dxs], [dxy, dyy, dys], [dxs, dys, dss]], d).unwrap_or([0.0; 3]);
        offset = [-sol[0], -sol[1], -sol[2]];
        if offset.iter().all(|v| v.abs() < 0.5) {
            converged = true;
            break;
        }
        if offset.iter().any(|v| !v.is_finite() || v.abs() > (i32::MAX / 3) as f32) {
            return None;
        }
        x += offset[0].round() as isize;
        y += offset[1].round() as isize;
        layer += offset[2].round() as isize;
        if layer < 1
            || layer > layers as isize
            || x < IMG_BORDER as isize
            || x >= (w - IMG_BORDER) as isize
            || y < IMG_BORDER as isize
            || y >= (h - IMG_BORDER) as isize
        {
            return None;
        }
    }
    if !converged {
        return None;
    }
    let (l, c, r) = (layer as usize, x as usize, y as usize);
    let (prev, img, next) = (&dogs[l - 1], &dogs[l], &dogs[l + 1]);
    let d = [
        (img.at(c + 1, r) - img.at(c - 1, r)) * DERIV,
        (img.at(c, r + 1) - img.at(c, r - 1)) * DERIV,
        (next.at(c, r) - prev.at(c, r)) * DERIV,
    ];
    let t = d[0] * offset[0] + d[1] * offset[1] + d[2] * offset[2];
    let contrast = img.at(c, r) * IMG_SCALE + t * 0.5;
    if contrast.abs() * (layers as f32) < cfg.contrast_threshold {
        return None;
    }
    let (dxx, dyy, dxy) = hessian2;
    let trace = dxx + dyy;
    let det = dxx * dyy - dxy * dxy;
    let edge = cfg.edge_threshold;
    if det <= 0.0 || trace * trace * edge >= (edge + 1.0) * (edge + 1.0) * det {
        return None;
    }
    Some(Extremum {
        octave,
        layer: l,
        x: c as f32 + offset[0],
        y: r as f32 + offset[1],
        size: cfg.sigma * 2f32.powf((l as f32 + offset[2]) / layers as f32) * 2.0,
        response: contrast.abs(),
    })
}

fn find_extrema(pyr: &Pyramid, cfg: &SiftConfig) -> Vec<Extremum> {
    let threshold = (0.5 * cfg.contrast_threshold / cfg.octave_layers as f32 * 255.0).floor();
    let mut out = Vec::new();
    for (o, dogs) in pyr.dog.iter().enumerate() {
        let (w, h) = (dogs[0].w, dogs[0].h);
        if w <= 2 * IMG_BORDER || h <= 2 * IMG_BORDER {
            continue;
        }
        for l in 1..=cfg.octave_layers {
            let (prev, img, next) = (&dogs[l - 1], &dogs[l], &dogs[l + 1]);
            for y in IMG_BORDER..h - IMG_BORDER {
                for x in IMG_BORDER..w - IMG_BORDER {
                    let v = img.at(x, y);
                    if v.abs() <= threshold {
                        continue;
                    }
                    let mut is_max = v > 0.0;
                    let mut is_min = v < 0.0;
                    'scan: for plane in [prev, img, next] {
                        for yy in y - 1..=y + 1 {
                            for xx in x - 1..=x + 1 {
                                let n = plane.at(xx, yy);
                                is_max &= v >= n;
                                is_min &= v <= n;
                                if !is_max && !is_min {
                                    break 'scan;
                                }
                            }
                        }
                    }
                    if is_max || is_min {
                        if let Some(e) = refine(pyr, o, l, x, y, cfg) {
                            out.push(e);
                        }
                    }
                }
            }
        }
    }
    out
}

fn orientation_hist(img: &Plane, cx: isize, cy: isize, radius: isize, sigma: f32) -> [f32; ORI_HIST_BINS] {
    let n = ORI_HIST_BINS;
    let exp_scale = -1.0 / (2.0 * sigma * sigma);
    let mut raw = [0f32; ORI_HIST_BINS];
    for i in -radius..=radius {
        let y = cy + i;
        if y <= 0 || y >= img.h as isize - 1 {
            continue;
        }
        for j in -radius..=radius {
            let x = cx + j;
            if x <= 0 || x >= img.w as isize - 1 {
                continue;
            }
            let (xu, yu) = (x as usize, y as usize);
            let dx = img.at(xu + 1, yu) - img.at(xu - 1, yu);
            let dy = img.at(xu, yu - 1) - img.at(xu, yu + 1);
            let weight = (((i * i + j * j) as f32) * exp_scale).exp();
            let angle = dy.atan2(dx).to_degrees().rem_euclid(360.0);
            let mut bin = (angle * n as f32 / 360.0).round() as isize;
            if bin >= n as isize {
                bin -= n as isize;
            }
            raw[bin as usize] += weight * dx.hypot(dy);
        }
    }
    let mut hist = [0f32; ORI_HIST_BINS];
    for i in 0..n {
        let at = |d: isize| raw[(i as isize + d).rem_euclid(n as isize) as usize];
        hist[i] = (at(-2) + at(2)) * (1.0 / 16.0) + (at(-1) + at(1)) * (4.0 / 16.0) + at(0) * (6.0 / 16.0);
    }
    hist
}

fn descriptor(img: &Plane, x: f32, y: f32, orientation: f32, scale: f32) -> [f32; DESCRIPTOR_LEN] {
    let d = DESCR_WIDTH;
    let n = DESCR_HIST_BINS;
    let (px, py) = (x.round() as isize, y.round() as isize);
    let (sin_t, cos_t) = (orientation * PI / 180.0).sin_cos();
    let bins_per_deg = n as f32 / 360.0;
    let exp_scale = -1.0 / (d as f32 * d as f32 * 0.5);
    let hist_width = DESCR_SCL_FCTR * scale;
    let radius = (hist_width * std::f32::consts::SQRT_2 * (d as f32 + 1.0) * 0.5).round();
    let radius = radius.min(((img.w * img.w + img.h * img.h) as f32).sqrt()) as isize;
    let (cos_t, sin_t) = (cos_t / hist_width, sin_t / hist_width);
    let (dp, np) = (d + 2, n + 2);
    let mut hist = vec![0f32; dp * dp * np];
    for i in -radius..=radius {
        for j in -radius..=radius {
            let c_rot = j as f32 * cos_t - i as f32 * sin_t;
            let r_rot = j as f32 * sin_t + i as f32 * cos_t;
            let rbin = r_rot + d as f32 / 2.0 - 0.5;
            let cbin = c_rot + d as f32 / 2.0 - 0.5;
            let (r, c) = (py + i, px + j);
            if !(rbin > -1.0 && rbin < d as f32 && cbin > -1.0 && cbin < d as f32) {
                continue;
            }
            if r <= 0 || r >= img.h as isize - 1 || c <= 0 || c >= img.w as isize - 1 {
                continue;
            }
            let (cu, ru) = (c as usize, r as usize);
            let dx = img.at(cu + 1, ru) - img.at(cu - 1, ru);
            let dy = img.at(cu, ru - 1) - img.at(cu, ru + 1);
            let weight = ((c_rot * c_rot + r_rot * r_rot) * exp_scale).exp();
            let angle = dy.atan2(dx).to_degrees().rem_euclid(360.0);
            let obin = (angle - orientation).rem_euclid(360.0) * bins_per_deg;
            let mag = dx.hypot(dy) * weight;

            let (r0, c0, o0) = (rbin.floor(), cbin.floor(), obin.floor());
            let (fr, fc, fo) = (rbin - r0, cbin - c0, obin - o0);
            let o0 = (o0 as isize).rem_euclid(n as isize) as usize;
            let (r0, c0) = ((r0 as isize + 1) as usize, (c0 as isize + 1) as usize);
            for (dr, wr) in [(0, 1.0 - fr), (1, fr)] {
                for (dc, wc) in [(0, 1.0 - fc), (1, fc)] {
                    for (dob, wo) in [(0, 1.0 - fo), (1, fo)] {
                        let idx = ((r0 + dr) * dp + c0 + dc) * np + o0 + dob;
                        hist[idx] += mag * wr * wc * wo;
                    }
                }
            }
        }
    }
    let mut out = [0f32; DESCRIPTOR_LEN];
    for i in 0..d {
        for j in 0..d {
            let base = ((i + 1) * dp + j + 1) * np;
            // fold the wrap-around orientation bin
            hist[base] += hist[base + n];
            for k in 0..n {
                out[(i * d + j) * n + k] = hist[base + k];
            }
        }
    }
    let norm = out.iter().map(|v| v * v).sum::<f32>().sqrt();
    let thr = norm * DESCR_MAG_THR;
    out.iter_mut().for_each(|v| *v = v.min(thr));
    let norm = out.iter().map(|v| v * v).sum::<f32>().sqrt().max(f32::EPSILON);
    out.iter_mut().for_each(|v| *v /= norm);
    out
}

fn to_plane(image: &GrayImage) -> Plane {
    Plane {
        w: image.width() as usize,
        h: image.height() as usize,
        data: image.as_raw().iter().map(|&v| v as f32).collect(),
    }
}

/// Detects keypoints and computes their descriptors. Output order is
/// ascending (x, y, scale, orientation); exact duplicates are removed.
pub fn sift_keypoints(image: &GrayImage, cfg: &SiftConfig) -> Vec<Keypoint> {
    if image.width() < 8 || image.height() < 8 {
        return Vec::new();
    }
    let up = upsample2(&to_plane(image));
    let sig_diff = (cfg.sigma * cfg.sigma - 4.0 * INIT_SIGMA * INIT_SIGMA).max(0.01).sqrt();
    let base = blur(&up, sig_diff);
    // one octave more than log2(side) - 2, counting the upsampled seed
    let octaves = (((base.w.min(base.h) as f32).log2() - 2.0).round() as isize + 1).max(1) as usize;
    let pyr = build_pyramid(base, octaves, cfg);

    let mut keypoints = Vec::new();
    for e in find_extrema(&pyr, cfg) {
        let img = &pyr.gauss[e.octave][e.layer];
        let scl = e.size * 0.5;
        let hist = orientation_hist(
            img,
            e.x.round() as isize,
            e.y.round() as isize,
            (ORI_RADIUS * scl).round() as isize,
            ORI_SIG_FCTR * scl,
        );
        let max = hist.iter().cloned().fold(0.0f32, f32::max);
        let threshold = max * ORI_PEAK_RATIO;
        let n = ORI_HIST_BINS;
        let octave_scale = 2f32.powi(e.octave as i32);
        for j in 0..n {
            let (l, r) = (hist[(j + n - 1) % n], hist[(j + 1) % n]);
            if !(hist[j] > l && hist[j] > r && hist[j] >= threshold) {
                continue;
            }
            let mut bin = j as f32 + 0.5 * (l - r) / (l - 2.0 * hist[j] + r);
            if bin < 0.0 {
                bin += n as f32;
            } else if bin >= n as f32 {
                bin -= n as f32;
            }
            let mut angle = 360.0 - 360.0 / n as f32 * bin;
            if (angle - 360.0).abs() < f32::EPSILON || angle >= 360.0 {
                angle = 0.0;
            }
            keypoints.push(Keypoint {
                // octave pixels -> upsampled base -> input image
                x: e.x * octave_scale * 0.5,
                y: e.y * octave_scale * 0.5,
                scale: e.size * octave_scale * 0.5,
                orientation: angle,
                response: e.response,
                descriptor: descriptor(img, e.x, e.y, angle, scl),
            });
        }
    }

    let canonical = |a: &Keypoint, b: &Keypoint| -> Ordering {
        a.x.total_cmp(&b.x)
            .then(a.y.total_cmp(&b.y))
            .then(a.scale.total_cmp(&b.scale))
            .then(a.orientation.total_cmp(&b.orientation))
    };
    keypoints.sort_by(canonical);
    keypoints.dedup_by(|a, b| canonical(a, b) == Ordering::Equal);
    if let Some(limit) = cfg.max_keypoints {
        if keypoints.len() > limit {
            keypoints.sort_by(|a, b| b.response.total_cmp(&a.response).then(canonical(a, b)));
            keypoints.truncate(limit);
            keypoints.sort_by(canonical);
        }
    }
    keypoints
}

#[cfg(test)]
mod tests {
    use super::*;
    use image::Luma;

    pub(crate) fn textured(side: u32, seed: u32) -> GrayImage {
        GrayImage::from_fn(side, side, |x, y| {
            let (xf, yf) = (x as f32, y as f32);
            let s = seed as f32;
            let v = 128.0
                + 50.0 * (xf * 0.31 + s).sin() * (yf * 0.17 + 0.5 * s).cos()
                + 40.0 * ((xf + 2.0 * yf) * 0.09 + s).sin()
                + 30.0 * ((xf * xf + yf * yf).sqrt() * 0.4).sin();
            Luma([v.clamp(0.0, 255.0) as u8])
        })
    }

    #[test]
    fn blank_image_has_no_keypoints() {
        let img = GrayImage::from_pixel(64, 64, Luma([120]));
        assert!(sift_keypoints(&img, &SiftConfig::default()).is_empty());
    }

    #[test]
    fn deterministic() {
        let img = textured(96, 3);
        let a = sift_keypoints(&img, &SiftConfig::default());
        let b = sift_keypoints(&img, &SiftConfig::default());
        assert!(!a.is_empty());
        assert_eq!(a, b);
    }

    #[test]
    fn descriptors_unit_norm_and_clamped() {
        let kps = sift_keypoints(&textured(96, 5), &SiftConfig::default());
        for kp in &kps {
            let norm: f32 = kp.descriptor.iter().map(|v| v * v).sum::<f32>().sqrt();
            assert!((norm - 1.0).abs() < 1e-4);
            assert!(kp.descriptor.iter().all(|&v| (0.0..=1.0).contains(&v)));
            assert!((0.0..360.0).contains(&kp.orientation));
            assert!(kp.x >= 0.0 && kp.x < 96.0 && kp.y >= 0.0 && kp.y < 96.0);
        }
    }

    #[test]
    fn max_keypoints_keeps_strongest() {
        let img = textured(128, 1);
        let all = sift_keypoints(&img, &SiftConfig::default());
        assert!(all.len() > 20);
        let cfg = SiftConfig {
            max_keypoints: Some(20),
            ..Default::default()
        };
        let top = sift_keypoints(&img, &cfg);
        assert_eq!(top.len(), 20);
        let mut responses: Vec<f32> = all.iter().map(|k| k.response).collect();
        responses.sort_by(|a, b| b.total_cmp(a));
        let weakest_kept = top.iter().map(|k| k.response).fold(f32::INFINITY, f32::min);
        assert!(weakest_kept >= responses[19]);
    }

    #[test]
    fn solve3_identity() {
        let x = solve3([[2.0, 0.0, 0.0], [0.0, 4.0, 0.0], [0.0, 0.0, 8.0]], [2.0, 2.0, 2.0]).unwrap();
        assert_eq!(x, [1.0, 0.5, 0.25]);
        assert!(solve3([[0.0; 3]; 3], [1.0; 3]).is_none());
    }

    #[test]
    fn reflect_101() {
        assert_eq!(reflect(-1, 5), 1);
        assert_eq!(reflect(-2, 5), 2);
        assert_eq!(reflect(5, 5), 3);
        assert_eq!(reflect(6, 5), 2);
        assert_eq!(reflect(3, 1), 0);
    }
}
