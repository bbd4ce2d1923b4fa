use rand::Rng;

use crate::{Scalar, Shape, Tensor};

/// Uniform in `[-1/sqrt(fan_in), 1/sqrt(fan_in)]`, where fan-in is the
/// product of the last three kernel extents.
pub fn fan_in_uniform<T: Scalar, R: Rng + ?Sized>(shape: impl Into<Shape>, rng: &mut R) -> Tensor<T> {
    let shape = shape.into();
    let fan_in = (shape.c() * shape.h() * shape.w()).max(1);
    let bound = 1.0 / (fan_in as f64).sqrt();
    Tensor::uniform(shape, -bound, bound, rng)
}
