use crate::image::{BinaryImage, GrayImage, RgbImage};
use crate::{Error, Result};

const SIGMA: f32 = 1.0;

/// Sobel edge strength of a Gaussian-smoothed luma image, normalized so the
/// 99th-percentile magnitude maps to 1 and clamped to [0, 1].
///
/// When the 99th percentile is zero (edges on under 1% of pixels) the
/// maximum magnitude is used instead, so sparse edges still register.
pub fn detect_edges(photo: &RgbImage) -> Result<GrayImage> {
    let (w, h) = (photo.width, photo.height);
    if w == 0 || h == 0 {
        return Err(Error::Image(format!("cannot detect edges in a {w}x{h} image")));
    }
    let gray = photo.to_gray();
    let smooth = gaussian_blur(&gray.data, w, h, SIGMA);
    let mag = sobel_magnitude(&smooth, w, h);

    let mut sorted = mag.clone();
    sorted.sort_by(f32::total_cmp);
    let rank = ((sorted.len() - 1) as f32 * 0.99).round() as usize;
    let mut scale = sorted[rank];
    if scale <= 0.0 {
        scale = sorted[sorted.len() - 1];
    }
    let data = if scale > 0.0 {
        mag.iter().map(|m| (m / scale).clamp(0.0, 1.0)).collect()
    } else {
        vec![0.0; w * h]
    };
    Ok(GrayImage { width: w, height: h, data })
}

/// `true` wherever `g >= threshold`.
pub fn binarize(g: &GrayImage, threshold: f32) -> BinaryImage {
    BinaryImage {
        width: g.width,
        height: g.height,
        data: g.data.iter().map(|&v| v >= threshold).collect(),
    }
}

fn gaussian_kernel(sigma: f32) -> Vec<f32> {
    let radius = (3.0 * sigma).ceil() as isize;
    let mut k: Vec<f32> = (-radius..=radius)
        .map(|i| (-(i * i) as f32 / (2.0 * sigma * sigma)).exp())
        .collect();
    let total: f32 = k.iter().sum();
    k.iter_mut().for_each(|v| *v /= total);
    k
}

#[inline]
fn clamp_idx(i: isize, n: usize) -> usize {
    i.clamp(0, n as isize - 1) as usize
}

// Separable blur with replicated borders.
fn gaussian_blur(src: &[f32], w: usize, h: usize, sigma: f32) -> Vec<f32> {
    let k = gaussian_kernel(sigma);
    let r = (k.len() / 2) as isize;
    let mut tmp = vec![0.0; w * h];
    for y in 0..h {
        for x in 0..w {
            tmp[y * w + x] = k
                .iter()
                .enumerate()
                .map(|(j, kv)| kv * src[y * w + clamp_idx(x as isize + j as isize - r, w)])
                .sum();
        }
    }
    let mut out = vec![0.0; w * h];
    for y in 0..h {
        for x in 0..w {
            out[y * w + x] = k
                .iter()
                .enumerate()
                .map(|(j, kv)| kv * tmp[clamp_idx(y as isize + j as isize - r, h) * w + x])
                .sum();
        }
    }
    out
}

fn sobel_magnitude(src: &[f32], w: usize, h: usize) -> Vec<f32> {
    let at = |x: isize, y: isize| src[clamp_idx(y, h) * w + clamp_idx(x, w)];
    let mut out = vec![0.0; w * h];
    for y in 0..h as isize {
        for x in 0..w as isize {
            let gx = (at(x + 1, y - 1) + 2.0 * at(x + 1, y) + at(x + 1, y + 1))
                - (at(x - 1, y - 1) + 2.0 * at(x - 1, y) + at(x - 1, y + 1));
            let gy = (at(x - 1, y + 1) + 2.0 * at(x, y + 1) + at(x + 1, y + 1))
                - (at(x - 1, y - 1) + 2.0 * at(x, y - 1) + at(x + 1, y - 1));
            out[y as usize * w + x as usize] = (gx * gx + gy * gy).sqrt();
        }
    }
    out
}
