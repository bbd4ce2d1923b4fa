//! GAN, auxiliary-classifier, supervision, perceptual, diversity and
//! gradient-penalty losses, and their composition into the D and G totals.

use std::fmt;
use std::rc::Rc;

use mrugan_core::{ConvGeom, Result, Scalar, Shape, Tape, Tensor, TensorError, Var};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::params::{ConvParams, ParamStore};

/// Which terms take part in the totals. Disabled terms contribute exactly 0.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LossSwitches {
    pub gan: bool,
    pub ac: bool,
    pub l1: bool,
    pub perceptual: bool,
    pub diversity: bool,
    pub gp: bool,
}

impl Default for LossSwitches {
    fn default() -> Self {
        LossSwitches {
            gan: true,
            ac: true,
            l1: true,
            perceptual: true,
            diversity: true,
            gp: true,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LossWeights {
    /// Perceptual weight, split equally across the four tapped layers.
    pub lambda_p: f64,
    pub lambda_div: f64,
    /// Gradient-penalty coefficient.
    #[serde(rename = "gp")]
    pub lambda_gp: f64,
    /// Penalty sample spread, in units of the real batch's std.
    pub perturb: f64,
    pub focal_gamma: f64,
    /// Largest mean absolute difference the diversity term rewards.
    pub div_cap: f64,
    pub enable: LossSwitches,
}

impl Default for LossWeights {
    fn default() -> Self {
        LossWeights {
            lambda_p: 1.0,
            lambda_div: 10.0,
            lambda_gp: 10.0,
            perturb: 0.5,
            focal_gamma: 2.0,
            div_cap: 1.0,
            enable: LossSwitches::default(),
        }
    }
}

impl LossWeights {
    pub fn validate(&self) -> Result<()> {
        let fields = [
            ("lambda_p", self.lambda_p),
            ("lambda_div", self.lambda_div),
            ("lambda_gp", self.lambda_gp),
            ("perturb", self.perturb),
            ("focal_gamma", self.focal_gamma),
            ("div_cap", self.div_cap),
        ];
        for (name, v) in fields {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(TensorError::Invalid {
                    op: "LossWeights",
                    msg: format!("{name} = {v} must be finite and non-negative"),
                });
            }
        }
        Ok(())
    }
}

/// Names of the individual loss terms, used in logs and diagnostics.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Term {
    GanD,
    AcD,
    Gp,
    GanG,
    AcG,
    L1,
    Perceptual,
    Diversity,
}

impl Term {
    pub const ALL: [Term; 8] = [
        Term::GanD,
        Term::AcD,
        Term::Gp,
        Term::GanG,
        Term::AcG,
        Term::L1,
        Term::Perceptual,
        Term::Diversity,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Term::GanD => "d_gan",
            Term::AcD => "d_ac",
            Term::Gp => "d_gp",
            Term::GanG => "g_gan",
            Term::AcG => "g_ac",
            Term::L1 => "g_l1",
            Term::Perceptual => "g_perceptual",
            Term::Diversity => "g_diversity",
        }
    }
}

impl fmt::Display for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// `-log σ(real) - log(1 - σ(fake))`, batch-averaged, in the overflow-safe
/// softplus form.
pub fn gan_loss_d<'t, T: Scalar>(real_logits: Var<'t, T>, fake_logits: Var<'t, T>) -> Result<Var<'t, T>> {
    real_logits.neg().softplus().mean().add(fake_logits.softplus().mean())
}

/// Non-saturating generator loss `-log σ(fake)`.
pub fn gan_loss_g<'t, T: Scalar>(fake_logits: Var<'t, T>) -> Var<'t, T> {
    fake_logits.neg().softplus().mean()
}

fn one_hot<T: Scalar>(labels: &[usize], classes: usize) -> Result<Tensor<T>> {
    if let Some(&bad) = labels.iter().find(|&&l| l >= classes) {
        return Err(TensorError::Label { label: bad, classes });
    }
    Ok(Tensor::from_fn([labels.len(), classes, 1, 1], |[n, c, _, _]| {
        if labels[n] == c { T::one() } else { T::zero() }
    }))
}

/// Focal classification loss `-(1 - p_t)^γ log p_t`, batch-averaged.
/// `logits` is (N, K, 1, 1). With γ = 0 this is plain cross-entropy.
pub fn focal_ac_loss<'t, T: Scalar>(logits: Var<'t, T>, labels: &[usize], gamma: f64) -> Result<Var<'t, T>> {
    let s = logits.shape();
    if labels.len() != s.n() {
        return Err(TensorError::Invalid {
            op: "focal_ac_loss",
            msg: format!("{} labels for batch of {}", labels.len(), s.n()),
        });
    }
    let hot = logits.tape().constant(one_hot(labels, s.c())?);
    let log_pt = logits
        .log_softmax()?
        .mul(hot)?
        .sum_to(Shape::new(s.n(), 1, s.h(), s.w()))?;
    let per_sample = if gamma == 0.0 {
        log_pt
    } else {
        let weight = log_pt.exp().neg().add_scalar(T::one()).pow(T::lit(gamma));
        weight.mul(log_pt)?
    };
    Ok(per_sample.mean().neg())
}

/// Mean absolute difference.
pub fn l1_loss<'t, T: Scalar>(generated: Var<'t, T>, target: Var<'t, T>) -> Result<Var<'t, T>> {
    Ok(generated.sub(target)?.abs().mean())
}

/// `-λ · min(mean |a - b|, cap)`.
pub fn diversity_loss<'t, T: Scalar>(
    gen_z1: Var<'t, T>,
    gen_z2: Var<'t, T>,
    lambda: f64,
    cap: f64,
) -> Result<Var<'t, T>> {
    let d = l1_loss(gen_z1, gen_z2)?;
    let clipped = if d.item().as_f64() > cap {
        d.tape().constant(Tensor::scalar(T::lit(cap)))
    } else {
        d
    };
    Ok(clipped.scale(T::lit(-lambda)))
}

/// Gradient penalty `λ · E[(‖∇D(x̂)‖₂ - 1)²]` around
/// `x̂ = real + perturb · std(real) · u`, `u ~ U[-1, 1]` per element.
///
/// `discriminator` maps a batch to (N, 1, 1, 1) logits. The gradient is
/// taken with `create_graph`, so the penalty is differentiable with respect
/// to the discriminator's parameters.
pub fn dragan_penalty<'t, T, F>(
    tape: &'t Tape<T>,
    discriminator: F,
    real: &Tensor<T>,
    lambda: f64,
    perturb: f64,
    rng: &mut impl Rng,
) -> Result<Var<'t, T>>
where
    T: Scalar,
    F: Fn(Var<'t, T>) -> Result<Var<'t, T>>,
{
    if lambda == 0.0 {
        return Ok(tape.constant(Tensor::scalar(T::zero())));
    }
    let mean = real.mean();
    let var = real.data().iter().map(|&v| (v - mean) * (v - mean)).sum::<T>() / T::lit(real.numel() as f64);
    let spread = T::lit(perturb) * var.sqrt();
    let noise = Tensor::<T>::uniform(real.shape(), -1.0, 1.0, rng);
    let hat = real.zip_map(&noise, "dragan_penalty", |r, u| r + spread * u)?;
    penalty_at(tape, discriminator, hat, lambda)
}

/// The penalty evaluated at the given points, without perturbation.
pub fn penalty_at<'t, T, F>(tape: &'t Tape<T>, discriminator: F, points: Tensor<T>, lambda: f64) -> Result<Var<'t, T>>
where
    T: Scalar,
    F: Fn(Var<'t, T>) -> Result<Var<'t, T>>,
{
    let s = points.shape();
    let x = tape.leaf(points, true);
    let logits = discriminator(x)?;
    let grad = tape.grad(logits.sum(), &[x], true)?.pop().flatten();
    let sq_norm = match grad {
        Some(g) => g.mul(g)?.sum_to(Shape::new(s.n(), 1, 1, 1))?,
        None => tape.constant(Tensor::zeros([s.n(), 1, 1, 1])),
    };
    let dev = sq_norm.add_scalar(T::lit(1e-12)).pow(T::lit(0.5)).add_scalar(-T::one());
    Ok(dev.mul(dev)?.mean().scale(T::lit(lambda)))
}

/// Frozen, seeded convolutional feature extractor with four taps at
/// decreasing resolution.
pub struct FeatureExtractor {
    store: ParamStore<f32>,
    convs: Vec<(ConvParams, usize)>,
}

impl FeatureExtractor {
    pub const CHANNELS: [usize; 4] = [16, 32, 64, 64];
    const STRIDES: [usize; 4] = [1, 2, 2, 2];

    pub fn new(seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut store = ParamStore::new();
        let mut c = 3;
        let convs = Self::CHANNELS
            .iter()
            .zip(Self::STRIDES)
            .enumerate()
            .map(|(i, (&co, s))| {
                let conv = ConvParams::new(&mut store, &format!("features/{i}"), (co, c, 3), true, &mut rng);
                c = co;
                (conv, s)
            })
            .collect();
        FeatureExtractor { store, convs }
    }

    pub fn params(&self) -> &ParamStore<f32> {
        &self.store
    }

    /// The four tapped activations of `x` (N, 3, H, W). Parameters enter the
    /// tape as constants.
    pub fn features<'t, T: Scalar>(&self, x: Var<'t, T>) -> Result<Vec<Var<'t, T>>> {
        let p = self.store.cast::<T>().bind_frozen(x.tape());
        let mut h = x;
        let mut taps = Vec::with_capacity(self.convs.len());
        for (conv, stride) in &self.convs {
            h = conv.apply(&p, h, ConvGeom::same(3, *stride))?.leaky_relu(T::lit(0.2));
            taps.push(h);
        }
        Ok(taps)
    }

    /// [`features`](Self::features) on a plain tensor.
    pub fn extract<T: Scalar>(&self, x: &Tensor<T>) -> Result<Vec<Tensor<T>>> {
        let tape = Tape::new();
        let taps = self.features(tape.constant(x.clone()))?;
        Ok(taps.iter().map(|v| Rc::unwrap_or_clone(v.value())).collect())
    }
}

/// `λ_p / 4 · Σ_i mean |φ_i(generated) - φ_i(target)|` over the four taps.
pub fn perceptual_loss<'t, T: Scalar>(
    extractor: &FeatureExtractor,
    generated: Var<'t, T>,
    target: Var<'t, T>,
    lambda_p: f64,
) -> Result<Var<'t, T>> {
    let tape = generated.tape();
    if lambda_p == 0.0 {
        return Ok(tape.constant(Tensor::scalar(T::zero())));
    }
    let fg = extractor.features(generated)?;
    let ft = extractor.features(target)?;
    let layers = fg.len() as f64;
    let mut total: Option<Var<'t, T>> = None;
    for (a, b) in fg.into_iter().zip(ft) {
        let d = l1_loss(a, b)?;
        total = Some(match total {
            Some(t) => t.add(d)?,
            None => d,
        });
    }
    Ok(total.expect("four taps").scale(T::lit(lambda_p / layers)))
}

/// Values that loss totals can be formed from: tape variables in training,
/// plain numbers in bookkeeping and tests.
pub trait LossValue: Copy {
    fn plus(self, other: Self) -> Result<Self>;
}

impl LossValue for f64 {
    fn plus(self, other: Self) -> Result<Self> {
        Ok(self + other)
    }
}

impl<'t, T: Scalar> LossValue for Var<'t, T> {
    fn plus(self, other: Self) -> Result<Self> {
        self.add(other)
    }
}

/// Discriminator-side terms. A term may be left `None` only when its
/// switch is off.
#[derive(Clone, Copy, Debug)]
pub struct DTerms<V> {
    pub gan: Option<V>,
    pub ac: Option<V>,
    pub gp: Option<V>,
}

/// Generator-side terms, weights already applied.
#[derive(Clone, Copy, Debug)]
pub struct GTerms<V> {
    pub gan: Option<V>,
    pub ac: Option<V>,
    pub l1: Option<V>,
    pub perceptual: Option<V>,
    pub diversity: Option<V>,
}

impl<V> Default for DTerms<V> {
    fn default() -> Self {
        DTerms { gan: None, ac: None, gp: None }
    }
}

impl<V> Default for GTerms<V> {
    fn default() -> Self {
        GTerms { gan: None, ac: None, l1: None, perceptual: None, diversity: None }
    }
}

fn sum_enabled<V: LossValue>(side: &'static str, parts: &[(Term, bool, Option<V>)]) -> Result<V> {
    let mut total: Option<V> = None;
    for &(term, on, value) in parts {
        if !on {
            continue;
        }
        let v = value.ok_or_else(|| TensorError::Invalid {
            op: side,
            msg: format!("term {term} is enabled but was not computed"),
        })?;
        total = Some(match total {
            Some(t) => t.plus(v)?,
            None => v,
        });
    }
    total.ok_or_else(|| TensorError::Invalid {
        op: side,
        msg: "every term is disabled".into(),
    })
}

/// GAN + classification + gradient penalty.
pub fn total_d<V: LossValue>(terms: &DTerms<V>, enable: &LossSwitches) -> Result<V> {
    sum_enabled(
        "total_d",
        &[
            (Term::GanD, enable.gan, terms.gan),
            (Term::AcD, enable.ac, terms.ac),
            (Term::Gp, enable.gp, terms.gp),
        ],
    )
}

/// GAN + classification on fakes + L1 + perceptual + diversity.
pub fn total_g<V: LossValue>(terms: &GTerms<V>, enable: &LossSwitches) -> Result<V> {
    sum_enabled(
        "total_g",
        &[
            (Term::GanG, enable.gan, terms.gan),
            (Term::AcG, enable.ac, terms.ac),
            (Term::L1, enable.l1, terms.l1),
            (Term::Perceptual, enable.perceptual, terms.perceptual),
            (Term::Diversity, enable.diversity, terms.diversity),
        ],
    )
}
