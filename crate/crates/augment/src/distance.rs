use crate::image::{BinaryImage, DistanceField};
use crate::{Error, Result};

/// Exact Euclidean distance to the nearest edge pixel, truncated at `cap`
/// pixels and divided by `cap`.
///
/// Uses the Felzenszwalb–Huttenlocher separable transform: a 1-D squared
/// distance pass along rows, then along columns, each as a lower envelope
/// of parabolas. An image without edge pixels maps to all ones.
pub fn distance_field(b: &BinaryImage, cap: f32) -> Result<DistanceField> {
    if !(cap > 0.0 && cap.is_finite()) {
        return Err(Error::Config(format!("distance cap {cap} must be positive and finite")));
    }
    let d2 = squared_edt(b);
    let cap = cap as f64;
    Ok(DistanceField {
        width: b.width,
        height: b.height,
        data: d2
            .into_iter()
            .map(|d| (d.sqrt().min(cap) / cap) as f32)
            .collect(),
    })
}

/// Squared distances, `f64::INFINITY` everywhere when the image has no edges.
pub(crate) fn squared_edt(b: &BinaryImage) -> Vec<f64> {
    let (w, h) = (b.width, b.height);
    let mut grid: Vec<f64> = b
        .data
        .iter()
        .map(|&e| if e { 0.0 } else { f64::INFINITY })
        .collect();
    let n = w.max(h);
    let mut scratch = Envelope::new(n);
    let mut line = vec![0.0; n];
    let mut out = vec![0.0; n];

    for y in 0..h {
        let row = &mut grid[y * w..(y + 1) * w];
        line[..w].copy_from_slice(row);
        scratch.transform(&line[..w], &mut out[..w]);
        row.copy_from_slice(&out[..w]);
    }
    for x in 0..w {
        for y in 0..h {
            line[y] = grid[y * w + x];
        }
        scratch.transform(&line[..h], &mut out[..h]);
        for y in 0..h {
            grid[y * w + x] = out[y];
        }
    }
    grid
}

struct Envelope {
    v: Vec<usize>,
    z: Vec<f64>,
}

impl Envelope {
    fn new(n: usize) -> Self {
        Envelope {
            v: vec![0; n],
            z: vec![0.0; n + 1],
        }
    }

    // out[q] = min_p (q - p)^2 + f[p]
    fn transform(&mut self, f: &[f64], out: &mut [f64]) {
        let n = f.len();
        let sites: Vec<usize> = (0..n).filter(|&p| f[p].is_finite()).collect();
        if sites.is_empty() {
            out.fill(f64::INFINITY);
            return;
        }
        let (v, z) = (&mut self.v, &mut self.z);
        let mut k = 0;
        v[0] = sites[0];
        z[0] = f64::NEG_INFINITY;
        z[1] = f64::INFINITY;
        for &q in &sites[1..] {
            let fq = f[q] + (q * q) as f64;
            let parabola_cross = |p: usize| {
                (fq - (f[p] + (p * p) as f64)) / (2.0 * (q as f64 - p as f64))
            };
            // z[0] is -inf, so this stops at k = 0 at the latest.
            let mut s = parabola_cross(v[k]);
            while s <= z[k] {
                k -= 1;
                s = parabola_cross(v[k]);
            }
            k += 1;
            v[k] = q;
            z[k] = s;
            z[k + 1] = f64::INFINITY;
        }
        let mut k = 0;
        for (q, o) in out.iter_mut().enumerate() {
            while z[k + 1] < q as f64 {
                k += 1;
            }
            let d = q as f64 - v[k] as f64;
            *o = d * d + f[v[k]];
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn one_dimensional_envelope_matches_brute_force() {
        let f = [f64::INFINITY, 4.0, f64::INFINITY, 0.0, 9.0, f64::INFINITY, 1.0];
        let mut out = [0.0; 7];
        Envelope::new(7).transform(&f, &mut out);
        for q in 0..7 {
            let want = (0..7)
                .map(|p| (q as f64 - p as f64).powi(2) + f[p])
                .fold(f64::INFINITY, f64::min);
            assert_eq!(out[q], want, "q={q}");
        }
    }
}
