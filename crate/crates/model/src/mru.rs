//! The masked residual unit.
//!
//! Given features `x` and a conditioning image `I` at the same resolution:
//!
//! ```text
//! m = gate(Conv([x, I]))
//! z = f(Conv([m ⊙ x, I]))          (then depth-1 further conv + f layers)
//! n = gate(Conv([x, I]))
//! y = (1 - n) ⊙ z + n ⊙ x̃
//! ```
//!
//! `x̃` is `x` average-pooled by the stride and projected by a 1x1 conv when
//! the block changes resolution or width. `m` has `in_channels` channels at
//! input resolution; `n` is computed with the block's stride and has
//! `out_channels` channels so that it lines up with `z` and `x̃`.

use mrugan_core::{ConvGeom, Result, Scalar, Shape, Tensor, TensorError, Var, NORM_EPS};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::params::{Bound, ConvParams, ParamId, ParamStore};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GateKind {
    Sigmoid,
    /// LeakyReLU followed by per-channel min-max normalization over H x W.
    LeakyNorm,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BlockKind {
    Mru,
    /// `y = z + x̃`: no masks, same z path.
    Residual,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum NormKind {
    None,
    Instance,
    /// Instance norm with a learned (scale, shift) per class.
    Conditional { classes: usize },
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MruConfig {
    pub in_channels: usize,
    pub out_channels: usize,
    pub image_channels: usize,
    pub stride: usize,
    /// Negative slope of the z-path activation.
    pub slope: f64,
    pub gate: GateKind,
    pub depth: usize,
    pub norm: NormKind,
    pub block: BlockKind,
}

impl MruConfig {
    pub fn new(in_channels: usize, out_channels: usize, image_channels: usize) -> Self {
        MruConfig {
            in_channels,
            out_channels,
            image_channels,
            stride: 1,
            slope: 0.2,
            gate: GateKind::Sigmoid,
            depth: 2,
            norm: NormKind::None,
            block: BlockKind::Mru,
        }
    }

    pub fn stride(mut self, stride: usize) -> Self {
        self.stride = stride;
        self
    }

    pub fn gate(mut self, gate: GateKind) -> Self {
        self.gate = gate;
        self
    }

    pub fn depth(mut self, depth: usize) -> Self {
        self.depth = depth;
        self
    }

    pub fn norm(mut self, norm: NormKind) -> Self {
        self.norm = norm;
        self
    }

    pub fn block(mut self, block: BlockKind) -> Self {
        self.block = block;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(TensorError::Invalid { op: "MruConfig", msg });
        if self.in_channels == 0 || self.out_channels == 0 {
            return bad("channel counts must be positive".into());
        }
        if !matches!(self.stride, 1 | 2) {
            return bad(format!("stride {} not in {{1, 2}}", self.stride));
        }
        if self.depth == 0 {
            return bad("z path needs at least one convolution".into());
        }
        if let NormKind::Conditional { classes: 0 } = self.norm {
            return bad("conditional norm needs at least one class".into());
        }
        Ok(())
    }

    fn needs_projection(&self) -> bool {
        self.in_channels != self.out_channels || self.stride != 1
    }

    /// Closed-form parameter count.
    ///
    /// With `a = in + image` input channels to the gates and the first z
    /// conv, `c_i = in`, `c_o = out`, depth `d`, classes `K`:
    ///
    /// ```text
    /// m:    9·a·c_i + c_i                 (MRU only)
    /// n:    9·a·c_o + c_o                 (MRU only)
    /// z:    9·a·c_o + c_o + (d-1)·(9·c_o² + c_o)
    /// proj: c_i·c_o                       (when width or resolution changes)
    /// norm: 2·K·c_o·d                     (conditional norm only)
    /// ```
    pub fn param_count(&self) -> usize {
        let a = self.in_channels + self.image_channels;
        let (ci, co, d) = (self.in_channels, self.out_channels, self.depth);
        // Convs feeding a norm carry no bias; the norm would cancel it.
        let zb = if self.norm == NormKind::None { co } else { 0 };
        let mut total = 9 * a * co + zb + (d - 1) * (9 * co * co + zb);
        if self.block == BlockKind::Mru {
            total += 9 * a * ci + ci + 9 * a * co + co;
        }
        if self.needs_projection() {
            total += ci * co;
        }
        if let NormKind::Conditional { classes } = self.norm {
            total += 2 * classes * co * d;
        }
        total
    }
}

#[derive(Clone, Copy, Debug)]
struct CondNorm {
    scale: ParamId,
    shift: ParamId,
}

/// Parameter handles of one block.
#[derive(Clone, Debug)]
pub struct MruParams {
    pub m: Option<ConvParams>,
    pub n: Option<ConvParams>,
    pub z: Vec<ConvParams>,
    pub projection: Option<ParamId>,
    norms: Vec<Option<CondNorm>>,
}

/// Replaces or freezes parts of the block for analysis.
#[derive(Clone, Copy, Debug, Default)]
pub struct GateOverride {
    /// Use this constant for every element of `m`.
    pub m: Option<f64>,
    /// Use this constant for every element of `n`.
    pub n: Option<f64>,
    /// Cut gradients through `m` and `n`.
    pub detach_gates: bool,
    /// Cut gradients through `z`.
    pub detach_z: bool,
}

pub struct MruOutput<'t, T: Scalar> {
    pub y: Var<'t, T>,
    pub z: Var<'t, T>,
    /// Absent for residual blocks.
    pub m: Option<Var<'t, T>>,
    pub n: Option<Var<'t, T>>,
}

#[derive(Clone, Debug)]
pub struct MruBlock {
    pub config: MruConfig,
    pub params: MruParams,
}

impl MruBlock {
    /// Registers parameters as `<prefix>/<path>/<kernel|bias>`, typically
    /// with `prefix = "mru/<index>"`.
    pub fn new<T: Scalar>(
        config: MruConfig,
        prefix: &str,
        store: &mut ParamStore<T>,
        rng: &mut impl Rng,
    ) -> Result<Self> {
        config.validate()?;
        let a = config.in_channels + config.image_channels;
        let (ci, co) = (config.in_channels, config.out_channels);
        let (m, n) = if config.block == BlockKind::Mru {
            (
                Some(ConvParams::new(store, &format!("{prefix}/m"), (ci, a, 3), true, rng)),
                Some(ConvParams::new(store, &format!("{prefix}/n"), (co, a, 3), true, rng)),
            )
        } else {
            (None, None)
        };
        let mut z = Vec::with_capacity(config.depth);
        let mut norms = Vec::with_capacity(config.depth);
        for i in 0..config.depth {
            let cin = if i == 0 { a } else { co };
            z.push(ConvParams::new(store, &format!("{prefix}/z{i}"), (co, cin, 3), config.norm == NormKind::None, rng));
            norms.push(match config.norm {
                NormKind::Conditional { classes } => Some(CondNorm {
                    scale: store.ones(format!("{prefix}/z{i}/norm_scale"), [classes, co, 1, 1]),
                    shift: store.zeros(format!("{prefix}/z{i}/norm_shift"), [classes, co, 1, 1]),
                }),
                _ => None,
            });
        }
        let projection = config
            .needs_projection()
            .then(|| store.fan_in(format!("{prefix}/proj/kernel"), [co, ci, 1, 1], rng));
        Ok(MruBlock {
            config,
            params: MruParams { m, n, z, projection, norms },
        })
    }

    pub fn forward<'t, T: Scalar>(
        &self,
        p: &Bound<'t, T>,
        x: Var<'t, T>,
        image: Var<'t, T>,
        labels: &[usize],
    ) -> Result<MruOutput<'t, T>> {
        self.forward_with(p, x, image, labels, &GateOverride::default())
    }

    pub fn forward_with<'t, T: Scalar>(
        &self,
        p: &Bound<'t, T>,
        x: Var<'t, T>,
        image: Var<'t, T>,
        labels: &[usize],
        ov: &GateOverride,
    ) -> Result<MruOutput<'t, T>> {
        let cfg = &self.config;
        let (xs, is) = (x.shape(), image.shape());
        if xs.c() != cfg.in_channels {
            return Err(TensorError::Invalid {
                op: "mru_forward",
                msg: format!("x has {} channels, block expects {}", xs.c(), cfg.in_channels),
            });
        }
        if is.n() != xs.n() || is.h() != xs.h() || is.w() != xs.w() || is.c() != cfg.image_channels {
            return Err(TensorError::ShapeMismatch {
                op: "mru_forward (image)",
                lhs: xs,
                rhs: is,
            });
        }
        let tape = x.tape();
        let same = ConvGeom::same(3, 1);
        let strided = ConvGeom::same(3, cfg.stride);
        let xi = x.concat_channels(image)?;

        let gate = |pre: Var<'t, T>, forced: Option<f64>| -> Result<Var<'t, T>> {
            let g = match forced {
                Some(v) => tape.constant(Tensor::full(pre.shape(), T::lit(v))),
                None => apply_gate(pre, cfg.gate, T::lit(cfg.slope))?,
            };
            Ok(if ov.detach_gates { g.detach() } else { g })
        };

        let (m, z_in) = match &self.params.m {
            Some(mp) => {
                let m = gate(mp.apply(p, xi, same)?, ov.m)?;
                (Some(m), m.mul(x)?.concat_channels(image)?)
            }
            None => (None, xi),
        };

        let mut z = z_in;
        for (i, (conv, norm)) in self.params.z.iter().zip(&self.params.norms).enumerate() {
            let geom = if i == 0 { strided } else { same };
            z = conv.apply(p, z, geom)?;
            z = match (cfg.norm, norm) {
                (NormKind::Conditional { .. }, Some(cn)) => {
                    z.cond_instance_norm(labels, p.get(cn.scale), p.get(cn.shift), T::lit(NORM_EPS))?
                }
                (NormKind::Instance, _) => z.instance_norm(T::lit(NORM_EPS))?,
                _ => z,
            };
            z = z.leaky_relu(T::lit(cfg.slope));
        }
        if ov.detach_z {
            z = z.detach();
        }

        let mut skip = x;
        if cfg.stride != 1 {
            skip = skip.downsample_avg(cfg.stride)?;
        }
        if let Some(k) = self.params.projection {
            skip = skip.conv2d(p.get(k), ConvGeom::new(1, 0))?;
        }

        let (n, y) = match &self.params.n {
            Some(np) => {
                let n = gate(np.apply(p, xi, strided)?, ov.n)?;
                let keep = n.neg().add_scalar(T::one());
                (Some(n), keep.mul(z)?.add(n.mul(skip)?)?)
            }
            None => (None, z.add(skip)?),
        };
        Ok(MruOutput { y, z, m, n })
    }
}

/// Gate nonlinearity applied to a mask pre-activation.
pub fn apply_gate<'t, T: Scalar>(pre: Var<'t, T>, kind: GateKind, slope: T) -> Result<Var<'t, T>> {
    match kind {
        GateKind::Sigmoid => Ok(pre.sigmoid()),
        GateKind::LeakyNorm => gate_normalize_leakyrelu(pre, slope),
    }
}

/// LeakyReLU, then per-sample, per-channel min-max scaling over H x W to
/// [0, 1]. Channels with zero range map to 0.5.
pub fn gate_normalize_leakyrelu<'t, T: Scalar>(pre: Var<'t, T>, slope: T) -> Result<Var<'t, T>> {
    let s = pre.shape();
    let a = pre.leaky_relu(slope);
    let lo = a.min_hw();
    let range = a.max_hw().sub(lo)?;
    let flat = range.value().map(|r| if r == T::zero() { T::one() } else { T::zero() });
    let flat = a.tape().constant(flat);
    let inv = range.add(flat)?.pow(T::lit(-1.0));
    a.sub(lo.broadcast_to(s)?)?
        .mul_broadcast(inv)?
        .add_broadcast(flat.scale(T::lit(0.5)))
}

/// Blocks applied in sequence, block `i` conditioned on `pyramid[i]`.
#[derive(Clone, Debug)]
pub struct MruStack {
    pub blocks: Vec<MruBlock>,
}

impl MruStack {
    /// Consecutive configs must chain: `out_channels` of one block equals
    /// `in_channels` of the next.
    pub fn new<T: Scalar>(
        configs: &[MruConfig],
        first_index: usize,
        store: &mut ParamStore<T>,
        rng: &mut impl Rng,
    ) -> Result<Self> {
        for pair in configs.windows(2) {
            if pair[0].out_channels != pair[1].in_channels {
                return Err(TensorError::Invalid {
                    op: "mru_stack",
                    msg: format!(
                        "block emits {} channels but the next expects {}",
                        pair[0].out_channels, pair[1].in_channels
                    ),
                });
            }
        }
        let blocks = configs
            .iter()
            .enumerate()
            .map(|(i, c)| MruBlock::new(*c, &format!("mru/{}", first_index + i), store, rng))
            .collect::<Result<_>>()?;
        Ok(MruStack { blocks })
    }

    pub fn forward<'t, T: Scalar>(
        &self,
        p: &Bound<'t, T>,
        x: Var<'t, T>,
        pyramid: &[Var<'t, T>],
        labels: &[usize],
    ) -> Result<Var<'t, T>> {
        if pyramid.len() < self.blocks.len() {
            return Err(TensorError::Invalid {
                op: "mru_stack",
                msg: format!("{} pyramid levels for {} blocks", pyramid.len(), self.blocks.len()),
            });
        }
        let mut h = x;
        for (block, image) in self.blocks.iter().zip(pyramid) {
            h = block.forward(p, h, *image, labels)?.y;
        }
        Ok(h)
    }

    pub fn param_count(&self) -> usize {
        self.blocks.iter().map(|b| b.config.param_count()).sum()
    }
}

/// `levels` successive 2x average-pool reductions, finest first.
pub fn make_pyramid<'t, T: Scalar>(base: Var<'t, T>, levels: usize) -> Result<Vec<Var<'t, T>>> {
    let s = base.shape();
    check_pyramid(s, levels)?;
    let mut out = vec![base];
    for _ in 1..levels {
        let next = out[out.len() - 1].downsample_avg(2)?;
        out.push(next);
    }
    Ok(out)
}

/// [`make_pyramid`] on plain tensors.
pub fn tensor_pyramid<T: Scalar>(base: &Tensor<T>, levels: usize) -> Result<Vec<Tensor<T>>> {
    check_pyramid(base.shape(), levels)?;
    let mut out = vec![base.clone()];
    for _ in 1..levels {
        let next = mrugan_core::kernels::avg_pool(&out[out.len() - 1], 2)?;
        out.push(next);
    }
    Ok(out)
}

fn check_pyramid(s: Shape, levels: usize) -> Result<()> {
    let f = 1usize << levels.saturating_sub(1);
    if levels == 0 || s.h() % f != 0 || s.w() % f != 0 {
        return Err(TensorError::Invalid {
            op: "make_pyramid",
            msg: format!("{}x{} cannot be halved {} times", s.h(), s.w(), levels.saturating_sub(1)),
        });
    }
    Ok(())
}
