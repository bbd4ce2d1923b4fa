//! Encoder-decoder generator and two-headed discriminator built from MRUs.

use mrugan_core::{ConvGeom, Result, Scalar, Tensor, TensorError, Var};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::mru::{make_pyramid, BlockKind, GateKind, MruBlock, MruConfig, NormKind};
use crate::params::{Bound, ConvParams, DenseParams, ParamStore};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GeneratorConfig {
    /// Input and output side length.
    pub resolution: usize,
    /// Output channels of each stride-2 encoder block.
    pub encoder: Vec<usize>,
    /// Output channels of each decoder block (each preceded by 2x upsampling).
    pub decoder: Vec<usize>,
    pub noise_dim: usize,
    pub classes: usize,
    pub gate: GateKind,
    pub block: BlockKind,
    pub depth: usize,
    pub skips: bool,
}

impl Default for GeneratorConfig {
    fn default() -> Self {
        GeneratorConfig {
            resolution: 32,
            encoder: vec![32, 64, 128],
            decoder: vec![64, 32, 32],
            noise_dim: 64,
            classes: 4,
            gate: GateKind::Sigmoid,
            block: BlockKind::Mru,
            depth: 2,
            skips: true,
        }
    }
}

impl GeneratorConfig {
    pub fn levels(&self) -> usize {
        self.encoder.len()
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(TensorError::Invalid { op: "GeneratorConfig", msg });
        if self.encoder.is_empty() || self.encoder.len() != self.decoder.len() {
            return bad(format!(
                "{} encoder vs {} decoder blocks",
                self.encoder.len(),
                self.decoder.len()
            ));
        }
        if self.resolution % (1 << self.encoder.len()) != 0 {
            return bad(format!(
                "resolution {} not divisible by 2^{}",
                self.resolution,
                self.encoder.len()
            ));
        }
        if self.classes == 0 {
            return bad("at least one class required".into());
        }
        Ok(())
    }

    /// Per-block configs: encoder blocks first, then decoder blocks.
    pub fn block_configs(&self) -> Vec<MruConfig> {
        let norm = NormKind::Conditional { classes: self.classes };
        let base = |ci, co| {
            MruConfig::new(ci, co, 1)
                .gate(self.gate)
                .depth(self.depth)
                .norm(norm)
                .block(self.block)
        };
        let levels = self.levels();
        let mut out = Vec::new();
        let mut c = 1;
        for &co in &self.encoder {
            out.push(base(c, co).stride(2));
            c = co;
        }
        c += self.noise_dim;
        for (j, &co) in self.decoder.iter().enumerate() {
            let skip = self.skip_source(j).map_or(0, |i| self.encoder[i]);
            out.push(base(c + skip, co));
            c = co;
        }
        debug_assert_eq!(out.len(), 2 * levels);
        out
    }

    /// Encoder block whose output matches decoder block `j`'s input
    /// resolution, if skips are on.
    fn skip_source(&self, j: usize) -> Option<usize> {
        let levels = self.levels();
        (self.skips && j + 2 <= levels).then(|| levels - 2 - j)
    }
}

pub struct Generator {
    pub config: GeneratorConfig,
    pub blocks: Vec<MruBlock>,
    output: ConvParams,
}

impl Generator {
    pub fn new<T: Scalar>(config: GeneratorConfig, store: &mut ParamStore<T>, rng: &mut impl Rng) -> Result<Self> {
        config.validate()?;
        let blocks = config
            .block_configs()
            .into_iter()
            .enumerate()
            .map(|(i, c)| MruBlock::new(c, &format!("mru/{i}"), store, rng))
            .collect::<Result<Vec<_>>>()?;
        let last = *config.decoder.last().expect("validated");
        let output = ConvParams::new(store, "out", (3, last, 1), true, rng);
        Ok(Generator { config, blocks, output })
    }

    pub fn param_count(&self) -> usize {
        self.blocks.iter().map(|b| b.config.param_count()).sum::<usize>()
            + 3 * self.config.decoder.last().copied().unwrap_or(0)
            + 3
    }

    /// `pyramid[i]` is the sketch field at `resolution / 2^i`, shape
    /// (N, 1, ·, ·); `noise` is (N, noise_dim, 1, 1). Returns (N, 3, R, R)
    /// in [-1, 1].
    pub fn forward<'t, T: Scalar>(
        &self,
        p: &Bound<'t, T>,
        pyramid: &[Var<'t, T>],
        noise: Var<'t, T>,
        labels: &[usize],
    ) -> Result<Var<'t, T>> {
        let cfg = &self.config;
        let levels = cfg.levels();
        if pyramid.len() != levels {
            return Err(TensorError::Invalid {
                op: "generator_forward",
                msg: format!("{} pyramid levels, expected {levels}", pyramid.len()),
            });
        }
        let n = pyramid[0].shape().n();
        let ns = noise.shape();
        if ns.n() != n || ns.c() != cfg.noise_dim || ns.h() != 1 || ns.w() != 1 {
            return Err(TensorError::Invalid {
                op: "generator_forward",
                msg: format!("noise shape {ns}, expected ({n},{},1,1)", cfg.noise_dim),
            });
        }
        if labels.len() != n {
            return Err(TensorError::Invalid {
                op: "generator_forward",
                msg: format!("{} labels for batch of {n}", labels.len()),
            });
        }
        if let Some(&bad) = labels.iter().find(|&&l| l >= cfg.classes) {
            return Err(TensorError::Label { label: bad, classes: cfg.classes });
        }

        let (enc, dec) = self.blocks.split_at(levels);
        let mut h = pyramid[0];
        let mut skips = Vec::with_capacity(levels);
        for (block, image) in enc.iter().zip(pyramid) {
            h = block.forward(p, h, *image, labels)?.y;
            skips.push(h);
        }
        let bottleneck = h.shape();
        let z = noise.broadcast_to(bottleneck.with_channels(cfg.noise_dim))?;
        h = h.concat_channels(z)?;
        for (j, block) in dec.iter().enumerate() {
            h = h.upsample_nearest(2)?;
            if let Some(i) = cfg.skip_source(j) {
                h = h.concat_channels(skips[i])?;
            }
            h = block.forward(p, h, pyramid[levels - 1 - j], labels)?.y;
        }
        Ok(self.output.apply(p, h, ConvGeom::new(1, 0))?.tanh())
    }

    /// Builds the pyramid from a (N, 1, R, R) field and runs [`forward`](Self::forward).
    pub fn forward_field<'t, T: Scalar>(
        &self,
        p: &Bound<'t, T>,
        field: Var<'t, T>,
        noise: Var<'t, T>,
        labels: &[usize],
    ) -> Result<Var<'t, T>> {
        let pyramid = make_pyramid(field, self.config.levels())?;
        self.forward(p, &pyramid, noise, labels)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DiscriminatorConfig {
    pub resolution: usize,
    /// Output channels of each stride-2 block.
    pub channels: Vec<usize>,
    pub classes: usize,
    pub gate: GateKind,
    pub block: BlockKind,
    pub depth: usize,
    /// Also condition every block on the sketch pyramid.
    pub condition_on_sketch: bool,
}

impl Default for DiscriminatorConfig {
    fn default() -> Self {
        DiscriminatorConfig {
            resolution: 32,
            channels: vec![32, 64, 128],
            classes: 4,
            gate: GateKind::Sigmoid,
            block: BlockKind::Mru,
            depth: 2,
            condition_on_sketch: false,
        }
    }
}

impl DiscriminatorConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(TensorError::Invalid { op: "DiscriminatorConfig", msg });
        if self.channels.is_empty() {
            return bad("at least one block required".into());
        }
        if self.resolution % (1 << self.channels.len()) != 0 {
            return bad(format!(
                "resolution {} not divisible by 2^{}",
                self.resolution,
                self.channels.len()
            ));
        }
        if self.classes == 0 {
            return bad("at least one class required".into());
        }
        Ok(())
    }

    fn image_channels(&self) -> usize {
        if self.condition_on_sketch { 4 } else { 3 }
    }

    pub fn block_configs(&self) -> Vec<MruConfig> {
        let mut c = 3;
        self.channels
            .iter()
            .map(|&co| {
                let cfg = MruConfig::new(c, co, self.image_channels())
                    .stride(2)
                    .gate(self.gate)
                    .depth(self.depth)
                    .norm(NormKind::Instance)
                    .block(self.block);
                c = co;
                cfg
            })
            .collect()
    }
}

pub struct Discriminator {
    pub config: DiscriminatorConfig,
    pub blocks: Vec<MruBlock>,
    gan_head: DenseParams,
    class_head: DenseParams,
}

/// Discriminator outputs: (N, 1, 1, 1) realness logits and (N, K, 1, 1)
/// class logits.
pub struct DOutput<'t, T: Scalar> {
    pub gan: Var<'t, T>,
    pub class: Var<'t, T>,
}

impl Discriminator {
    pub fn new<T: Scalar>(config: DiscriminatorConfig, store: &mut ParamStore<T>, rng: &mut impl Rng) -> Result<Self> {
        config.validate()?;
        let blocks = config
            .block_configs()
            .into_iter()
            .enumerate()
            .map(|(i, c)| MruBlock::new(c, &format!("mru/{i}"), store, rng))
            .collect::<Result<Vec<_>>>()?;
        let last = *config.channels.last().expect("validated");
        let gan_head = DenseParams::new(store, "head/gan", (1, last), rng);
        let class_head = DenseParams::new(store, "head/class", (config.classes, last), rng);
        Ok(Discriminator {
            config,
            blocks,
            gan_head,
            class_head,
        })
    }

    pub fn param_count(&self) -> usize {
        let last = self.config.channels.last().copied().unwrap_or(0);
        self.blocks.iter().map(|b| b.config.param_count()).sum::<usize>()
            + (last + 1)
            + (last + 1) * self.config.classes
    }

    /// `image` is (N, 3, R, R). `sketch` is required iff the config
    /// conditions on it.
    pub fn forward<'t, T: Scalar>(
        &self,
        p: &Bound<'t, T>,
        image: Var<'t, T>,
        sketch: Option<Var<'t, T>>,
    ) -> Result<DOutput<'t, T>> {
        let cfg = &self.config;
        let s = image.shape();
        if s.c() != 3 || s.h() != cfg.resolution || s.w() != cfg.resolution {
            return Err(TensorError::Invalid {
                op: "discriminator_forward",
                msg: format!("image shape {s}, expected (N,3,{r},{r})", r = cfg.resolution),
            });
        }
        let levels = self.blocks.len();
        let mut pyramid = make_pyramid(image, levels)?;
        match (cfg.condition_on_sketch, sketch) {
            (true, Some(sk)) => {
                for (level, sk) in pyramid.iter_mut().zip(make_pyramid(sk, levels)?) {
                    *level = level.concat_channels(sk)?;
                }
            }
            (false, _) => {}
            (true, None) => {
                return Err(TensorError::Invalid {
                    op: "discriminator_forward",
                    msg: "sketch-conditioned discriminator called without a sketch".into(),
                });
            }
        }
        let mut h = image;
        for (block, level) in self.blocks.iter().zip(&pyramid) {
            h = block.forward(p, h, *level, &[])?.y;
        }
        let pooled = h.mean_hw();
        Ok(DOutput {
            gan: self.gan_head.apply(p, pooled)?,
            class: self.class_head.apply(p, pooled)?,
        })
    }
}

/// (N, noise_dim, 1, 1) standard normal noise.
pub fn sample_noise<T: Scalar>(n: usize, noise_dim: usize, rng: &mut impl Rng) -> Tensor<T> {
    Tensor::randn([n, noise_dim, 1, 1], rng)
}
