//! Parametric shapes rendered as photo, exact edge field and jittered
//! sketch field.

use mrugan_augment::io::quantize_field;
use mrugan_augment::{distance_field, AugmentConfig, BinaryImage, DistanceField, RgbImage};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::{invalid, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ShapeClass {
    Ellipse,
    Rectangle,
    Triangle,
    Star,
}

impl ShapeClass {
    pub const ALL: [ShapeClass; 4] = [ShapeClass::Ellipse, ShapeClass::Rectangle, ShapeClass::Triangle, ShapeClass::Star];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Result<Self> {
        match Self::ALL.get(i) {
            Some(&c) => Ok(c),
            None => invalid("shape class", format!("{i} (only {} classes exist)", Self::ALL.len())),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            ShapeClass::Ellipse => "ellipse",
            ShapeClass::Rectangle => "rectangle",
            ShapeClass::Triangle => "triangle",
            ShapeClass::Star => "star",
        }
    }

    /// Outline on the unit circle, counter-clockwise.
    fn unit_outline(self) -> Vec<[f64; 2]> {
        let polar = |a: f64, r: f64| [r * a.cos(), r * a.sin()];
        let tau = std::f64::consts::TAU;
        match self {
            ShapeClass::Ellipse => (0..96).map(|i| polar(tau * i as f64 / 96.0, 1.0)).collect(),
            ShapeClass::Rectangle => (0..4).map(|i| polar(tau * (i as f64 + 0.5) / 4.0, 1.0)).collect(),
            ShapeClass::Triangle => (0..3).map(|i| polar(tau * (0.25 + i as f64 / 3.0), 1.0)).collect(),
            ShapeClass::Star => (0..10)
                .map(|i| polar(tau * (0.25 + i as f64 / 10.0), if i % 2 == 0 { 1.0 } else { 0.45 }))
                .collect(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ShapeSpec {
    pub class: ShapeClass,
    /// Pixel coordinates; pixel (i, j) covers [i, i+1) x [j, j+1).
    pub center: [f64; 2],
    /// Circumradius in pixels.
    pub scale: f64,
    /// Minor-to-major axis ratio in (0, 1].
    pub aspect: f64,
    /// Radians.
    pub rotation: f64,
    pub fill: [f32; 3],
    pub background: [f32; 3],
    /// RMS sketch displacement as a fraction of `scale`, at most 0.1.
    pub jitter: f64,
}

pub const MARGIN: f64 = 2.0;
pub const MAX_JITTER: f64 = 0.1;

impl ShapeSpec {
    pub fn outline(&self) -> Vec<[f64; 2]> {
        let (s, c) = self.rotation.sin_cos();
        self.class
            .unit_outline()
            .into_iter()
            .map(|[u, v]| {
                let (x, y) = (self.scale * u, self.scale * self.aspect * v);
                [self.center[0] + c * x - s * y, self.center[1] + s * x + c * y]
            })
            .collect()
    }

    pub fn validate(&self, resolution: usize) -> Result<()> {
        if !(self.scale > 0.0 && self.scale.is_finite()) {
            return invalid("shape spec", format!("scale {}", self.scale));
        }
        if !(self.aspect > 0.0 && self.aspect <= 1.0) {
            return invalid("shape spec", format!("aspect {} outside (0, 1]", self.aspect));
        }
        if !(0.0..=MAX_JITTER).contains(&self.jitter) {
            return invalid("shape spec", format!("jitter {} outside [0, {MAX_JITTER}]", self.jitter));
        }
        if !self.rotation.is_finite() {
            return invalid("shape spec", "rotation must be finite");
        }
        let colors = self.fill.iter().chain(&self.background);
        if colors.clone().any(|v| !(0.0..=1.0).contains(v)) {
            return invalid("shape spec", "colors must lie in [0, 1]");
        }
        let hi = resolution as f64 - MARGIN;
        for [x, y] in self.outline() {
            if x < MARGIN || y < MARGIN || x > hi || y > hi {
                return invalid(
                    "shape spec",
                    format!("vertex ({x:.2}, {y:.2}) closer than {MARGIN} px to the {resolution}-px canvas border"),
                );
            }
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct PairedSample {
    pub spec: ShapeSpec,
    pub label: usize,
    /// Values are multiples of 1/255 in [0, 1].
    pub photo: RgbImage,
    pub edge_mask: BinaryImage,
    pub sketch_mask: BinaryImage,
    /// Values are multiples of 1/65535, so they survive 16-bit PNG storage.
    pub edge: DistanceField,
    pub sketch: DistanceField,
}

fn hsv(h: f64, s: f64, v: f64) -> [f32; 3] {
    let h = h.rem_euclid(1.0) * 6.0;
    let i = h.floor();
    let f = h - i;
    let (p, q, t) = (v * (1.0 - s), v * (1.0 - s * f), v * (1.0 - s * (1.0 - f)));
    let rgb = match i as u32 {
        0 => [v, t, p],
        1 => [q, v, p],
        2 => [p, v, t],
        3 => [p, q, v],
        4 => [t, p, v],
        _ => [v, p, q],
    };
    rgb.map(|c| c as f32)
}

/// A random in-canvas spec. Fill hue clusters around a per-class value;
/// backgrounds are dark and desaturated.
pub fn random_spec(class: ShapeClass, resolution: usize, rng: &mut impl Rng) -> ShapeSpec {
    let r = resolution as f64;
    let scale = (r * rng.random_range(0.26..0.4)).min(r / 2.0 - MARGIN);
    let aspect = match class {
        ShapeClass::Ellipse => rng.random_range(0.5..0.8),
        ShapeClass::Rectangle => rng.random_range(0.5..1.0),
        _ => rng.random_range(0.85..1.0),
    };
    let lo = MARGIN + scale;
    let hi = r - MARGIN - scale;
    let mut coord = || if hi > lo { rng.random_range(lo..hi) } else { r / 2.0 };
    let center = [coord(), coord()];
    let hue = class.index() as f64 / ShapeClass::ALL.len() as f64 + rng.random_range(-0.06..0.06);
    ShapeSpec {
        class,
        center,
        scale,
        aspect,
        rotation: rng.random_range(0.0..std::f64::consts::TAU),
        fill: hsv(hue, rng.random_range(0.55..0.9), rng.random_range(0.65..0.95)),
        background: hsv(rng.random_range(0.0..1.0), rng.random_range(0.0..0.2), rng.random_range(0.1..0.35)),
        jitter: rng.random_range(0.04..0.08),
    }
}

/// Points along the closed polygon at most `step` apart.
fn densify(poly: &[[f64; 2]], step: f64) -> Vec<[f64; 2]> {
    let mut out = Vec::new();
    for (i, a) in poly.iter().enumerate() {
        let b = poly[(i + 1) % poly.len()];
        let len = (b[0] - a[0]).hypot(b[1] - a[1]);
        let n = (len / step).ceil().max(1.0) as usize;
        for k in 0..n {
            let t = k as f64 / n as f64;
            out.push([a[0] + t * (b[0] - a[0]), a[1] + t * (b[1] - a[1])]);
        }
    }
    out
}

/// Smooth random displacement of every contour point: white Gaussian
/// noise circularly convolved with a Gaussian whose width is 1/8 of the
/// perimeter, rescaled to the requested RMS amplitude.
fn jitter_contour(points: &[[f64; 2]], amplitude: f64, rng: &mut impl Rng) -> Vec<[f64; 2]> {
    let m = points.len();
    let white: Vec<[f64; 2]> = (0..m)
        .map(|_| [rng.sample(StandardNormal), rng.sample(StandardNormal)])
        .collect();
    let sigma = m as f64 / 8.0;
    let kernel: Vec<f64> = (0..m)
        .map(|d| {
            let d = d.min(m - d) as f64;
            (-0.5 * (d / sigma).powi(2)).exp()
        })
        .collect();
    let mut smooth = vec![[0.0f64; 2]; m];
    for (i, s) in smooth.iter_mut().enumerate() {
        for (j, w) in white.iter().enumerate() {
            let k = kernel[(i + m - j) % m];
            s[0] += k * w[0];
            s[1] += k * w[1];
        }
    }
    let rms = (smooth.iter().map(|d| d[0] * d[0] + d[1] * d[1]).sum::<f64>() / m as f64).sqrt();
    let gain = if rms > 0.0 { amplitude / rms } else { 0.0 };
    points
        .iter()
        .zip(&smooth)
        .map(|(p, d)| [p[0] + gain * d[0], p[1] + gain * d[1]])
        .collect()
}

fn rasterize_contour(points: &[[f64; 2]], resolution: usize) -> BinaryImage {
    let mut mask = BinaryImage::empty(resolution, resolution);
    let top = resolution as f64 - 1.0;
    for p in densify(points, 0.25) {
        let x = p[0].floor().clamp(0.0, top) as usize;
        let y = p[1].floor().clamp(0.0, top) as usize;
        mask.set(x, y, true);
    }
    mask
}

fn inside(poly: &[[f64; 2]], x: f64, y: f64) -> bool {
    let mut hit = false;
    let mut j = poly.len() - 1;
    for i in 0..poly.len() {
        let (a, b) = (poly[i], poly[j]);
        if (a[1] > y) != (b[1] > y) && x < (b[0] - a[0]) * (y - a[1]) / (b[1] - a[1]) + a[0] {
            hit = !hit;
        }
        j = i;
    }
    hit
}

const SUPERSAMPLE: usize = 4;

fn quantize8(v: f32) -> f32 {
    (v.clamp(0.0, 1.0) * 255.0).round() as u8 as f32 / 255.0
}

fn quantized_field(mask: &BinaryImage, cap: f32) -> Result<DistanceField> {
    let mut f = distance_field(mask, cap)?;
    for v in &mut f.data {
        *v = quantize_field(*v) as f32 / 65535.0;
    }
    Ok(f)
}

/// Renders the photo (4x4 supersampled coverage), the exact-contour edge
/// field and the jittered-contour sketch field. Both fields use the
/// resolution's default cap.
pub fn render_sample(spec: &ShapeSpec, resolution: usize, rng: &mut impl Rng) -> Result<PairedSample> {
    spec.validate(resolution)?;
    let outline = spec.outline();
    let n = SUPERSAMPLE * SUPERSAMPLE;
    let mut data = Vec::with_capacity(resolution * resolution);
    for py in 0..resolution {
        for px in 0..resolution {
            let mut hits = 0;
            for k in 0..n {
                let sx = px as f64 + ((k % SUPERSAMPLE) as f64 + 0.5) / SUPERSAMPLE as f64;
                let sy = py as f64 + ((k / SUPERSAMPLE) as f64 + 0.5) / SUPERSAMPLE as f64;
                hits += inside(&outline, sx, sy) as usize;
            }
            let c = hits as f32 / n as f32;
            data.push(std::array::from_fn(|i| quantize8(spec.background[i] * (1.0 - c) + spec.fill[i] * c)));
        }
    }
    let photo = RgbImage::new(resolution, resolution, data)?;

    let contour = densify(&outline, 0.25);
    let edge_mask = rasterize_contour(&contour, resolution);
    let sketch_mask = if spec.jitter > 0.0 {
        rasterize_contour(&jitter_contour(&contour, spec.jitter * spec.scale, rng), resolution)
    } else {
        edge_mask.clone()
    };
    let cap = AugmentConfig::for_resolution(resolution).cap;
    Ok(PairedSample {
        spec: spec.clone(),
        label: spec.class.index(),
        edge: quantized_field(&edge_mask, cap)?,
        sketch: quantized_field(&sketch_mask, cap)?,
        photo,
        edge_mask,
        sketch_mask,
    })
}

/// Per-sample generator seed, so any sample can be re-rendered alone.
pub fn sample_seed(seed: u64, class: usize, index: usize) -> u64 {
    let mut h = seed ^ 0x243f_6a88_85a3_08d3;
    for v in [class as u64, index as u64] {
        h = (h ^ v).wrapping_mul(0x1000_0000_01b3).rotate_left(29);
    }
    h
}

/// Sample `index` of class `class` in the corpus generated from `seed`.
pub fn corpus_sample(seed: u64, class: usize, index: usize, resolution: usize) -> Result<PairedSample> {
    let mut rng = ChaCha8Rng::seed_from_u64(sample_seed(seed, class, index));
    let spec = random_spec(ShapeClass::from_index(class)?, resolution, &mut rng);
    render_sample(&spec, resolution, &mut rng)
}
