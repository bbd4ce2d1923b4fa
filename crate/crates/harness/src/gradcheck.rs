//! Finite-difference checks of every differentiable building block, in
//! double precision over independent random draws.

use mrugan_core::{grad_check, ConvGeom, GradCheck, GradCheckReport, Shape, Tensor, Var, NORM_EPS};
use mrugan_model::{
    diversity_loss, focal_ac_loss, gan_loss_d, gan_loss_g, l1_loss, penalty_at, perceptual_loss, sample_noise,
    Bound, Discriminator, DiscriminatorConfig, FeatureExtractor, GateKind, Generator, GeneratorConfig, MruBlock,
    MruConfig, NormKind, ParamStore,
};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::Result;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SuiteEntry {
    pub name: String,
    pub draws: usize,
    pub max_rel_err: f64,
    pub tol: f64,
    /// Draws whose check failed.
    pub failed: Vec<usize>,
}

impl SuiteEntry {
    pub fn passed(&self) -> bool {
        self.failed.is_empty()
    }
}

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Weighted sum with fixed pseudo-random weights.
fn probe<'t>(v: Var<'t, f64>, seed: u64) -> mrugan_core::Result<Var<'t, f64>> {
    let w = Tensor::<f64>::uniform(v.shape(), -1.0, 1.0, &mut rng(seed ^ 0x9e37));
    Ok(v.mul(v.tape().constant(w))?.sum())
}

fn checker(seed: u64, max_coords: usize) -> GradCheck {
    GradCheck { seed, max_coords, ..GradCheck::default() }
}

fn tanh_d<'t>(a: Var<'t, f64>) -> impl Fn(Var<'t, f64>) -> mrugan_core::Result<Var<'t, f64>> {
    move |x| {
        let s = x.shape();
        x.mul_broadcast(a)?.tanh().sum_to(Shape::new(s.n(), 1, 1, 1))
    }
}

struct Collector {
    entries: Vec<SuiteEntry>,
    draws: usize,
}

impl Collector {
    fn run(&mut self, name: &str, mut check: impl FnMut(u64) -> mrugan_core::Result<GradCheckReport>) -> Result<()> {
        let mut entry = SuiteEntry {
            name: name.into(),
            draws: self.draws,
            max_rel_err: 0.0,
            tol: GradCheck::default().tol,
            failed: Vec::new(),
        };
        for draw in 0..self.draws {
            let report = check(draw as u64)?;
            entry.max_rel_err = entry.max_rel_err.max(report.max_rel_err());
            if !report.passed() {
                entry.failed.push(draw);
            }
        }
        self.entries.push(entry);
        Ok(())
    }
}

fn tiny_generator(gate: GateKind) -> GeneratorConfig {
    GeneratorConfig {
        resolution: 8,
        encoder: vec![3, 4],
        decoder: vec![4, 3],
        noise_dim: 2,
        classes: 2,
        gate,
        depth: 1,
        ..GeneratorConfig::default()
    }
}

fn tiny_discriminator(gate: GateKind, sketch: bool) -> DiscriminatorConfig {
    DiscriminatorConfig {
        resolution: 8,
        channels: vec![3, 4],
        classes: 3,
        gate,
        depth: 1,
        condition_on_sketch: sketch,
        ..DiscriminatorConfig::default()
    }
}

fn check_block(cfg: MruConfig, labels: &[usize], draw: u64) -> mrugan_core::Result<GradCheckReport> {
    let mut store = ParamStore::<f64>::new();
    let block = MruBlock::new(cfg, "mru/0", &mut store, &mut rng(1000 + draw))?;
    let mut r = rng(2000 + draw);
    let mut inputs = vec![
        Tensor::randn([2, cfg.in_channels, 4, 4], &mut r),
        Tensor::uniform([2, cfg.image_channels, 4, 4], 0.0, 1.0, &mut r),
    ];
    // Shifted off the identity so conditional norm tables differ per class.
    inputs.extend(store.values().iter().map(|v| v.map(|a| a + 0.1)));
    grad_check(
        |v| {
            let p = Bound::from_vars(v[2..].to_vec());
            probe(block.forward(&p, v[0], v[1], labels)?.y, draw)
        },
        &inputs,
        &checker(draw, 12),
    )
}

/// Runs every check `draws` times. Each entry reports the worst relative
/// error over its draws.
pub fn gradcheck_suite(draws: usize) -> Result<Vec<SuiteEntry>> {
    let mut c = Collector { entries: Vec::new(), draws };

    c.run("conv2d", |d| {
        let mut r = rng(10 + d);
        let inputs = [Tensor::randn([2, 3, 5, 5], &mut r), Tensor::randn([4, 3, 3, 3], &mut r)];
        let geom = ConvGeom::new(1 + d as usize % 2, 1);
        grad_check(|v| probe(v[0].conv2d(v[1], geom)?, d), &inputs, &checker(d, 32))
    })?;
    c.run("cond_instance_norm", |d| {
        let mut r = rng(20 + d);
        let inputs = [
            Tensor::randn([3, 2, 4, 4], &mut r),
            Tensor::uniform([2, 2, 1, 1], 0.5, 1.5, &mut r),
            Tensor::randn([2, 2, 1, 1], &mut r),
        ];
        let labels = [1, 0, 1];
        grad_check(
            |v| probe(v[0].cond_instance_norm(&labels, v[1], v[2], NORM_EPS)?, d),
            &inputs,
            &checker(d, 32),
        )
    })?;
    for (name, gate) in [("mru_forward/sigmoid", GateKind::Sigmoid), ("mru_forward/leaky-norm", GateKind::LeakyNorm)] {
        c.run(name, |d| {
            let cfg = if d % 2 == 0 {
                MruConfig::new(2, 3, 1).stride(2)
            } else {
                MruConfig::new(3, 3, 2).norm(NormKind::Conditional { classes: 2 })
            };
            check_block(cfg.gate(gate).depth(2), &[1, 0], d)
        })?;
    }
    for (name, gate) in [("generator/sigmoid", GateKind::Sigmoid), ("generator/leaky-norm", GateKind::LeakyNorm)] {
        c.run(name, |d| {
            let mut store = ParamStore::<f64>::new();
            let g = Generator::new(tiny_generator(gate), &mut store, &mut rng(100 + d))?;
            let mut r = rng(200 + d);
            for id in store.ids().collect::<Vec<_>>() {
                if store.name(id).contains("norm_") {
                    *store.get_mut(id) = Tensor::uniform(store.get(id).shape(), 0.5, 1.5, &mut r);
                }
            }
            let mut inputs = vec![Tensor::<f64>::uniform([2, 1, 8, 8], 0.0, 1.0, &mut r), sample_noise(2, 2, &mut r)];
            inputs.extend(store.values().iter().cloned());
            grad_check(
                |v| {
                    let p = Bound::from_vars(v[2..].to_vec());
                    probe(g.forward_field(&p, v[0], v[1], &[1, 0])?, d)
                },
                &inputs,
                &checker(d, 4),
            )
        })?;
    }
    for (name, gate, sketch) in [
        ("discriminator/sigmoid", GateKind::Sigmoid, false),
        ("discriminator/leaky-norm", GateKind::LeakyNorm, false),
        ("discriminator/sketch", GateKind::Sigmoid, true),
    ] {
        c.run(name, |d| {
            let mut store = ParamStore::<f64>::new();
            let disc = Discriminator::new(tiny_discriminator(gate, sketch), &mut store, &mut rng(300 + d))?;
            let mut r = rng(400 + d);
            let mut inputs = vec![
                Tensor::<f64>::uniform([2, 3, 8, 8], -1.0, 1.0, &mut r),
                Tensor::<f64>::uniform([2, 1, 8, 8], 0.0, 1.0, &mut r),
            ];
            inputs.extend(store.values().iter().cloned());
            grad_check(
                |v| {
                    let p = Bound::from_vars(v[2..].to_vec());
                    let out = disc.forward(&p, v[0], sketch.then_some(v[1]))?;
                    probe(out.gan, d)?.add(probe(out.class, d + 1)?)
                },
                &inputs,
                &checker(d, 4),
            )
        })?;
    }

    let logits = |n: usize, k: usize, seed: u64| Tensor::<f64>::uniform([n, k, 1, 1], -3.0, 3.0, &mut rng(seed));
    c.run("loss/gan_d", |d| {
        grad_check(|v| gan_loss_d(v[0], v[1]), &[logits(4, 1, 500 + d), logits(4, 1, 600 + d)], &checker(d, 64))
    })?;
    c.run("loss/gan_g", |d| grad_check(|v| Ok(gan_loss_g(v[0])), &[logits(4, 1, 700 + d)], &checker(d, 64)))?;
    c.run("loss/focal_ac", |d| {
        let gamma = [0.0, 0.5, 2.0][d as usize % 3];
        grad_check(|v| focal_ac_loss(v[0], &[0, 3, 2], gamma), &[logits(3, 4, 800 + d)], &checker(d, 64))
    })?;
    let images = |shape: [usize; 4], seed: u64| Tensor::<f64>::uniform(shape, -1.0, 1.0, &mut rng(seed));
    c.run("loss/l1", |d| {
        grad_check(|v| l1_loss(v[0], v[1]), &[images([2, 3, 4, 4], 900 + d), images([2, 3, 4, 4], 950 + d)], &checker(d, 32))
    })?;
    let ex = FeatureExtractor::new(1);
    c.run("loss/perceptual", |d| {
        let inputs = [images([1, 3, 8, 8], 1100 + d), images([1, 3, 8, 8], 1150 + d)];
        grad_check(|v| perceptual_loss(&ex, v[0], v[1], 1.0), &inputs, &checker(d, 24))
    })?;
    c.run("loss/diversity", |d| {
        let inputs = [images([2, 3, 4, 4], 1200 + d), images([2, 3, 4, 4], 1250 + d)];
        grad_check(|v| diversity_loss(v[0], v[1], 10.0, 1.0), &inputs, &checker(d, 32))
    })?;
    c.run("loss/dragan", |d| {
        let real = images([3, 1, 3, 3], 1300 + d);
        let a0 = Tensor::<f64>::uniform([1, 1, 3, 3], 0.2, 1.5, &mut rng(1350 + d));
        grad_check(|v| penalty_at(v[0].tape(), tanh_d(v[0]), real.clone(), 10.0), &[a0], &checker(d, 16))
    })?;
    Ok(c.entries)
}
