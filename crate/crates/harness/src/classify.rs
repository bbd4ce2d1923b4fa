//! MRU-stack image classifier and a width-matched residual baseline.

use mrugan_core::{adam_step, AdamState, Tape, Tensor, Var};
use mrugan_data::{Corpus, Source, Split};
use mrugan_model::{
    focal_ac_loss, make_pyramid, BlockKind, Bound, DenseParams, GateKind, MruConfig, MruStack, NormKind, ParamStore,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::{ClassifyConfig, Result};

/// Stride-2 blocks conditioned on the photo itself at every scale,
/// followed by global pooling and a dense head.
pub struct StackClassifier {
    pub store: ParamStore<f32>,
    pub stack: MruStack,
    head: DenseParams,
}

pub fn stack_configs(channels: &[usize], depth: usize, gate: GateKind, block: BlockKind) -> Vec<MruConfig> {
    let mut c = 3;
    channels
        .iter()
        .map(|&co| {
            let cfg = MruConfig::new(c, co, 3)
                .stride(2)
                .depth(depth)
                .gate(gate)
                .block(block)
                .norm(NormKind::Instance);
            c = co;
            cfg
        })
        .collect()
}

/// Parameters of a classifier with these blocks and `classes` outputs.
pub fn classifier_param_count(configs: &[MruConfig], classes: usize) -> usize {
    let last = configs.last().map_or(0, |c| c.out_channels);
    configs.iter().map(MruConfig::param_count).sum::<usize>() + (last + 1) * classes
}

/// Residual-block widths whose classifier parameter count is closest to
/// `target`: `channels` scaled by a common factor.
pub fn matched_residual_channels(channels: &[usize], depth: usize, classes: usize, target: usize) -> Vec<usize> {
    let count = |w: &[usize]| classifier_param_count(&stack_configs(w, depth, GateKind::Sigmoid, BlockKind::Residual), classes);
    (100..=400)
        .map(|pct| channels.iter().map(|&c| (c * pct + 50) / 100).collect::<Vec<_>>())
        .min_by_key(|w| count(w).abs_diff(target))
        .expect("non-empty search range")
}

impl StackClassifier {
    pub fn new(configs: &[MruConfig], classes: usize, seed: u64) -> Result<Self> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut store = ParamStore::new();
        let stack = MruStack::new(configs, 0, &mut store, &mut rng)?;
        let last = configs.last().map_or(3, |c| c.out_channels);
        let head = DenseParams::new(&mut store, "head", (classes, last), &mut rng);
        Ok(StackClassifier { store, stack, head })
    }

    pub fn logits<'t>(&self, p: &Bound<'t, f32>, photos: Var<'t, f32>) -> Result<Var<'t, f32>> {
        let levels = self.stack.blocks.len();
        let pyramid = make_pyramid(photos, levels)?;
        let h = self.stack.forward(p, photos, &pyramid, &[])?;
        Ok(self.head.apply(p, h.mean_hw())?)
    }

    pub fn accuracy(&self, photos: &Tensor<f32>, labels: &[usize]) -> Result<f64> {
        let tape = Tape::new();
        let z = tape.no_grad(|| {
            let p = self.store.bind_frozen(&tape);
            self.logits(&p, tape.constant(photos.clone()))
        })?;
        let z = z.value();
        let k = z.shape().c();
        let hits = labels
            .iter()
            .enumerate()
            .filter(|&(n, &l)| {
                let row = &z.data()[n * k..(n + 1) * k];
                row.iter().enumerate().max_by(|a, b| a.1.total_cmp(b.1)).map(|(i, _)| i) == Some(l)
            })
            .count();
        Ok(hits as f64 / labels.len().max(1) as f64)
    }

    /// Adam on cross-entropy over random training batches.
    pub fn fit(&mut self, corpus: &Corpus, cfg: &ClassifyConfig, seed: u64) -> Result<()> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let train = corpus.indices(Split::Train);
        let mut adam = AdamState::standard(self.store.values());
        for _ in 0..cfg.iterations {
            let picks: Vec<usize> = (0..cfg.batch_size).map(|_| train[rng.random_range(0..train.len())]).collect();
            let batch = corpus.batch(&picks, &vec![Source::Edge; picks.len()])?;
            let tape = Tape::new();
            let p = self.store.bind(&tape);
            let z = self.logits(&p, tape.constant(batch.photos))?;
            let loss = focal_ac_loss(z, &batch.labels, 0.0)?;
            let grads = tape.gradients(loss, p.vars())?;
            adam_step(self.store.values_mut(), &grads, &mut adam, cfg.lr)?;
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClassifyRow {
    pub name: String,
    pub channels: Vec<usize>,
    pub params: usize,
    pub test_accuracy: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClassifyReport {
    pub rows: Vec<ClassifyRow>,
}

impl ClassifyReport {
    pub fn row(&self, name: &str) -> Option<&ClassifyRow> {
        self.rows.iter().find(|r| r.name == name)
    }
}

/// Trains MRU classifiers with both gate kinds and a residual baseline
/// whose widths are scaled to match the sigmoid MRU's parameter count.
pub fn classify_mode(cfg: &ClassifyConfig, corpus: &Corpus, seed: u64) -> Result<ClassifyReport> {
    let k = corpus.classes;
    let test = corpus.indices(Split::Test);
    let test_batch = corpus.batch(&test, &vec![Source::Edge; test.len()])?;
    let mru_params = classifier_param_count(&stack_configs(&cfg.channels, cfg.depth, GateKind::Sigmoid, BlockKind::Mru), k);
    let residual = matched_residual_channels(&cfg.channels, cfg.depth, k, mru_params);
    let runs = [
        ("mru-sigmoid", cfg.channels.clone(), GateKind::Sigmoid, BlockKind::Mru),
        ("mru-leaky-norm", cfg.channels.clone(), GateKind::LeakyNorm, BlockKind::Mru),
        ("residual", residual, GateKind::Sigmoid, BlockKind::Residual),
    ];
    let mut rows = Vec::new();
    for (name, channels, gate, block) in runs {
        let configs = stack_configs(&channels, cfg.depth, gate, block);
        let mut net = StackClassifier::new(&configs, k, seed)?;
        net.fit(corpus, cfg, seed ^ 0x5eed)?;
        rows.push(ClassifyRow {
            name: name.into(),
            params: net.store.numel(),
            test_accuracy: net.accuracy(&test_batch.photos, &test_batch.labels)?,
            channels,
        });
    }
    Ok(ClassifyReport { rows })
}
