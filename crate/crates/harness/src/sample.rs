//! Image grid of generations: one row per test sample with columns
//! sketch field, G(z1), G(z2) and the ground-truth photo.

use std::path::Path;

use mrugan_augment::{io::write_rgb, RgbImage};
use mrugan_core::Tensor;
use mrugan_data::{Corpus, Source, Split};
use mrugan_model::sample_noise;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::{Error, Gan, Result};

const PAD: usize = 2;
const COLUMNS: usize = 4;

/// Copies sample `n` of an (N, C, R, R) tensor with values in `[lo, hi]`
/// into the grid cell at (`row`, `col`). One channel is shown as gray.
fn blit(grid: &mut RgbImage, t: &Tensor<f32>, n: usize, row: usize, col: usize, lo: f32, hi: f32) {
    let s = t.shape();
    let (c, r) = (s.c(), s.h());
    let x0 = PAD + col * (r + PAD);
    let y0 = PAD + row * (r + PAD);
    let data = &t.data()[n * c * r * r..(n + 1) * c * r * r];
    for y in 0..r {
        for x in 0..r {
            let px = std::array::from_fn(|k| (data[(k.min(c - 1)) * r * r + y * r + x] - lo) / (hi - lo));
            grid.data[(y0 + y) * grid.width + x0 + x] = px;
        }
    }
}

/// Writes a PNG grid for the first `rows` test samples. Returns the grid.
pub fn sample_grid(gan: &Gan, corpus: &Corpus, rows: usize, seed: u64, path: Option<&Path>) -> Result<RgbImage> {
    let mut picks = corpus.indices(Split::Test);
    if picks.is_empty() {
        picks = corpus.indices(Split::Train);
    }
    picks.truncate(rows);
    if picks.is_empty() {
        return Err(Error::Invalid("no samples to draw".into()));
    }
    let batch = corpus.batch(&picks, &vec![Source::Sketch; picks.len()])?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let nd = gan.generator.config.noise_dim;
    let z1 = sample_noise(picks.len(), nd, &mut rng);
    let z2 = sample_noise(picks.len(), nd, &mut rng);
    let g1 = gan.generate(&batch.fields, &z1, &batch.labels)?;
    let g2 = gan.generate(&batch.fields, &z2, &batch.labels)?;

    let r = corpus.resolution;
    let width = PAD + COLUMNS * (r + PAD);
    let height = PAD + picks.len() * (r + PAD);
    let mut grid = RgbImage::filled(width, height, [1.0; 3]);
    for row in 0..picks.len() {
        blit(&mut grid, &batch.fields, row, row, 0, 0.0, 1.0);
        blit(&mut grid, &g1, row, row, 1, -1.0, 1.0);
        blit(&mut grid, &g2, row, row, 2, -1.0, 1.0);
        blit(&mut grid, &batch.photos, row, row, 3, -1.0, 1.0);
    }
    if let Some(path) = path {
        write_rgb(path, &grid)?;
    }
    Ok(grid)
}
