//! Masked residual units, the sketch-conditioned generator and
//! discriminator, and the composite GAN objective.
//!
//! Networks are architecture descriptions holding [`ParamId`] handles; the
//! tensors live in a [`ParamStore`] that is bound to a tape for each step.
//! Everything is generic over the scalar type so the same code runs in
//! `f32` for training and `f64` for gradient checks.

pub mod losses;
pub mod mru;
pub mod networks;
pub mod params;

pub use losses::{
    diversity_loss, dragan_penalty, focal_ac_loss, gan_loss_d, gan_loss_g, l1_loss, penalty_at,
    perceptual_loss, total_d, total_g, DTerms, FeatureExtractor, GTerms, LossSwitches, LossValue,
    LossWeights, Term,
};
pub use mru::{
    apply_gate, gate_normalize_leakyrelu, make_pyramid, tensor_pyramid, BlockKind, GateKind,
    GateOverride, MruBlock, MruConfig, MruOutput, MruParams, MruStack, NormKind,
};
pub use networks::{sample_noise, DOutput, Discriminator, DiscriminatorConfig, Generator, GeneratorConfig};
pub use params::{Bound, ConvParams, DenseParams, ParamId, ParamStore};
