#![allow(dead_code)]

use mrugan_core::{GradCheck, Result, Tensor, Var};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Weighted sum with fixed pseudo-random weights, so every output element
/// contributes differently to the scalar under test.
pub fn probe<'t>(v: Var<'t, f64>, seed: u64) -> Result<Var<'t, f64>> {
    let w = Tensor::<f64>::uniform(v.shape(), -1.0, 1.0, &mut rng(seed ^ 0x9e37));
    Ok(v.mul(v.tape().constant(w))?.sum())
}

pub fn checker(seed: u64, max_coords: usize) -> GradCheck {
    GradCheck {
        seed,
        max_coords,
        ..GradCheck::default()
    }
}
