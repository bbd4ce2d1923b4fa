use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Interleaved RGB with channel values in [0, 1].
#[derive(Clone, Debug, PartialEq)]
pub struct RgbImage {
    pub width: usize,
    pub height: usize,
    pub data: Vec<[f32; 3]>,
}

impl RgbImage {
    pub fn new(width: usize, height: usize, data: Vec<[f32; 3]>) -> Result<Self> {
        if data.len() != width * height {
            return Err(Error::Image(format!(
                "{} pixels for a {width}x{height} RGB image",
                data.len()
            )));
        }
        Ok(RgbImage { width, height, data })
    }

    pub fn filled(width: usize, height: usize, rgb: [f32; 3]) -> Self {
        RgbImage {
            width,
            height,
            data: vec![rgb; width * height],
        }
    }

    pub fn get(&self, x: usize, y: usize) -> [f32; 3] {
        self.data[y * self.width + x]
    }

    /// Rec. 601 luma.
    pub fn to_gray(&self) -> GrayImage {
        GrayImage {
            width: self.width,
            height: self.height,
            data: self
                .data
                .iter()
                .map(|[r, g, b]| (0.299 * r + 0.587 * g + 0.114 * b).clamp(0.0, 1.0))
                .collect(),
        }
    }
}

/// Single-channel image with values in [0, 1].
#[derive(Clone, Debug, PartialEq)]
pub struct GrayImage {
    pub width: usize,
    pub height: usize,
    pub data: Vec<f32>,
}

impl GrayImage {
    pub fn new(width: usize, height: usize, data: Vec<f32>) -> Result<Self> {
        if data.len() != width * height {
            return Err(Error::Image(format!(
                "{} pixels for a {width}x{height} gray image",
                data.len()
            )));
        }
        if let Some(v) = data.iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(Error::Image(format!("gray value {v} outside [0, 1]")));
        }
        Ok(GrayImage { width, height, data })
    }

    pub fn get(&self, x: usize, y: usize) -> f32 {
        self.data[y * self.width + x]
    }
}

/// Edge mask: `true` marks an edge pixel.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct BinaryImage {
    pub width: usize,
    pub height: usize,
    pub data: Vec<bool>,
}

/// 8-neighbour offsets, clockwise from north.
pub(crate) const NEIGHBORS: [(isize, isize); 8] = [
    (0, -1),
    (1, -1),
    (1, 0),
    (1, 1),
    (0, 1),
    (-1, 1),
    (-1, 0),
    (-1, -1),
];

impl BinaryImage {
    pub fn empty(width: usize, height: usize) -> Self {
        BinaryImage {
            width,
            height,
            data: vec![false; width * height],
        }
    }

    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> bool) -> Self {
        let mut data = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                data.push(f(x, y));
            }
        }
        BinaryImage { width, height, data }
    }

    /// Parses rows of `#`/`1` (edge) and `.`/`0` (background).
    pub fn from_ascii(rows: &[&str]) -> Self {
        let height = rows.len();
        let width = rows.first().map_or(0, |r| r.len());
        BinaryImage::from_fn(width, height, |x, y| {
            matches!(rows[y].as_bytes()[x], b'#' | b'1')
        })
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> bool {
        self.data[y * self.width + x]
    }

    /// Out-of-bounds coordinates read as background.
    #[inline]
    pub fn get_signed(&self, x: isize, y: isize) -> bool {
        x >= 0
            && y >= 0
            && (x as usize) < self.width
            && (y as usize) < self.height
            && self.data[y as usize * self.width + x as usize]
    }

    pub fn set(&mut self, x: usize, y: usize, v: bool) {
        self.data[y * self.width + x] = v;
    }

    pub fn count(&self) -> usize {
        self.data.iter().filter(|&&v| v).count()
    }

    /// Number of edge pixels among the 8 neighbours of (x, y).
    pub fn neighbor_count(&self, x: usize, y: usize) -> usize {
        NEIGHBORS
            .iter()
            .filter(|(dx, dy)| self.get_signed(x as isize + dx, y as isize + dy))
            .count()
    }

    /// True when every edge pixel of `self` is also an edge pixel of `other`.
    pub fn is_subset_of(&self, other: &BinaryImage) -> bool {
        self.data.iter().zip(&other.data).all(|(&a, &b)| !a || b)
    }

    pub fn edge_pixels(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.data
            .iter()
            .enumerate()
            .filter(|(_, &v)| v)
            .map(move |(i, _)| (i % self.width, i / self.width))
    }
}

/// Truncated, normalized distance to the nearest edge pixel, in [0, 1].
#[derive(Clone, Debug, PartialEq)]
pub struct DistanceField {
    pub width: usize,
    pub height: usize,
    pub data: Vec<f32>,
}

impl DistanceField {
    pub fn get(&self, x: usize, y: usize) -> f32 {
        self.data[y * self.width + x]
    }

    /// Pixels where the field is exactly zero.
    pub fn zero_set(&self) -> BinaryImage {
        BinaryImage {
            width: self.width,
            height: self.height,
            data: self.data.iter().map(|&v| v == 0.0).collect(),
        }
    }
}

/// Parameters of the edge-map cleanup pipeline.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AugmentConfig {
    /// Binarization threshold in (0, 1).
    pub threshold: f32,
    /// Components smaller than this are removed.
    pub min_component: usize,
    /// Minimum edge neighbours for a pixel to survive erosion, in [0, 8].
    pub erode_k: usize,
    /// Longest spur removed.
    pub spur_len: usize,
    /// Distance truncation in pixels.
    pub cap: f32,
}

impl Default for AugmentConfig {
    fn default() -> Self {
        AugmentConfig {
            threshold: 0.25,
            min_component: 10,
            erode_k: 2,
            spur_len: 4,
            cap: 32.0,
        }
    }
}

impl AugmentConfig {
    /// Defaults are tuned for 64 px images; pixel-valued parameters scale
    /// linearly with the longer side.
    pub fn for_resolution(size: usize) -> Self {
        let d = Self::default();
        let s = size as f32 / 64.0;
        AugmentConfig {
            min_component: ((d.min_component as f32 * s).round() as usize).max(1),
            spur_len: ((d.spur_len as f32 * s).round() as usize).max(1),
            cap: (d.cap * s).max(1.0),
            ..d
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.threshold > 0.0 && self.threshold < 1.0) {
            return Err(Error::Config(format!("threshold {} outside (0, 1)", self.threshold)));
        }
        if self.min_component == 0 {
            return Err(Error::Config("min_component must be at least 1".into()));
        }
        if self.erode_k > 8 {
            return Err(Error::Config(format!("erode_k {} exceeds 8", self.erode_k)));
        }
        if self.spur_len == 0 {
            return Err(Error::Config("spur_len must be at least 1".into()));
        }
        if !(self.cap > 0.0) {
            return Err(Error::Config(format!("cap {} must be positive", self.cap)));
        }
        Ok(())
    }
}
