//! Frozen evaluation classifier, the classifier-based score and the
//! generator report.

use std::time::Instant;

use mrugan_core::{adam_step, softmax, AdamState, Checkpoint, ConvGeom, Tape, Tensor, Var};
use mrugan_data::{Corpus, Source, Split};
use mrugan_model::{focal_ac_loss, sample_noise, Bound, ConvParams, DenseParams, ParamStore};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::{Config, EvalConfig, Error, Gan, Result};

/// Small strided conv net trained on real photos and then frozen.
pub struct EvalClassifier {
    pub store: ParamStore<f32>,
    convs: Vec<(ConvParams, usize)>,
    head: DenseParams,
    pub classes: usize,
}

const WIDTHS: [(usize, usize); 4] = [(16, 1), (32, 2), (64, 2), (64, 2)];

impl EvalClassifier {
    fn untrained(classes: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut store = ParamStore::new();
        let mut c = 3;
        let convs = WIDTHS
            .iter()
            .enumerate()
            .map(|(i, &(co, s))| {
                let conv = ConvParams::new(&mut store, &format!("classifier/conv{i}"), (co, c, 3), true, &mut rng);
                c = co;
                (conv, s)
            })
            .collect();
        let head = DenseParams::new(&mut store, "classifier/head", (classes, c), &mut rng);
        EvalClassifier { store, convs, head, classes }
    }

    fn logits<'t>(&self, p: &Bound<'t, f32>, x: Var<'t, f32>) -> Result<Var<'t, f32>> {
        let mut h = x;
        for (conv, s) in &self.convs {
            h = conv.apply(p, h, ConvGeom::same(3, *s))?.leaky_relu(0.2);
        }
        Ok(self.head.apply(p, h.mean_hw())?)
    }

    /// Trains on the corpus's training photos with random flips.
    pub fn train(corpus: &Corpus, cfg: &EvalConfig) -> Result<Self> {
        let mut net = Self::untrained(corpus.classes, cfg.seed);
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x636c_6173);
        let train = corpus.indices(Split::Train);
        let mut adam = AdamState::standard(net.store.values());
        for _ in 0..cfg.classifier_iterations {
            let picks: Vec<usize> = (0..cfg.classifier_batch)
                .map(|_| train[rng.random_range(0..train.len())])
                .collect();
            let mut batch = corpus.batch(&picks, &vec![Source::Edge; picks.len()])?;
            let flips: Vec<bool> = (0..picks.len()).map(|_| rng.random_bool(0.5)).collect();
            batch.flip_horizontal(&flips);
            let tape = Tape::new();
            let p = net.store.bind(&tape);
            let z = net.logits(&p, tape.constant(batch.photos))?;
            let loss = focal_ac_loss(z, &batch.labels, 0.0)?;
            let grads = tape.gradients(loss, p.vars())?;
            adam_step(net.store.values_mut(), &grads, &mut adam, cfg.classifier_lr)?;
        }
        Ok(net)
    }

    /// Class probabilities, one row per image of `photos` (N, 3, R, R).
    pub fn probabilities(&self, photos: &Tensor<f32>) -> Result<Vec<Vec<f64>>> {
        let tape = Tape::new();
        let z = tape.no_grad(|| {
            let p = self.store.bind_frozen(&tape);
            self.logits(&p, tape.constant(photos.clone()))
        })?;
        let probs = softmax(&z.value());
        Ok(probs.data().chunks(self.classes).map(|r| r.iter().map(|&v| v as f64).collect()).collect())
    }

    pub fn accuracy(&self, photos: &Tensor<f32>, labels: &[usize]) -> Result<f64> {
        let probs = self.probabilities(photos)?;
        let hits = probs.iter().zip(labels).filter(|(p, &l)| argmax(p) == l).count();
        Ok(hits as f64 / labels.len().max(1) as f64)
    }

    pub fn save_into(&self, ck: &mut Checkpoint) {
        self.store.save_into(ck, "eval");
        ck.scalars.insert("eval/classes".into(), self.classes as f64);
    }

    pub fn load_from(ck: &Checkpoint) -> Result<Self> {
        let classes = ck
            .scalars
            .get("eval/classes")
            .map(|&v| v as usize)
            .ok_or_else(|| Error::Mismatch("no evaluation classifier in checkpoint".into()))?;
        let mut net = Self::untrained(classes, 0);
        net.store.load_from(ck, "eval")?;
        Ok(net)
    }
}

fn argmax(p: &[f64]) -> usize {
    p.iter().enumerate().max_by(|a, b| a.1.total_cmp(b.1)).map_or(0, |(i, _)| i)
}

/// `exp(mean_x KL(p(y|x) || p(y)))` with `p(y)` the batch marginal.
pub fn score_analogue(probs: &[Vec<f64>]) -> Result<f64> {
    if probs.len() < 2 {
        return Err(Error::Invalid(format!("score needs at least 2 samples, got {}", probs.len())));
    }
    let k = probs[0].len();
    if probs.iter().any(|p| p.len() != k) {
        return Err(Error::Invalid("probability rows have different lengths".into()));
    }
    let n = probs.len() as f64;
    let marginal: Vec<f64> = (0..k).map(|j| probs.iter().map(|p| p[j]).sum::<f64>() / n).collect();
    let mean_kl = probs
        .iter()
        .map(|p| {
            p.iter()
                .zip(&marginal)
                .filter(|(&pi, _)| pi > 0.0)
                .map(|(&pi, &mi)| pi * (pi.ln() - mi.ln()))
                .sum::<f64>()
        })
        .sum::<f64>()
        / n;
    Ok(mean_kl.exp())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub score: f64,
    /// Fraction of generated images classified as their conditioning label,
    /// per class.
    pub per_class_accuracy: Vec<f64>,
    pub mean_l1: f64,
    /// Mean L1 between two generations with independent noise.
    pub diversity: f64,
    pub samples: usize,
    pub wall_clock_s: f64,
}

impl EvalReport {
    /// Equality of everything but the timing.
    pub fn same_result(&self, other: &EvalReport) -> bool {
        EvalReport { wall_clock_s: 0.0, ..self.clone() } == EvalReport { wall_clock_s: 0.0, ..other.clone() }
    }
}

const EVAL_CHUNK: usize = 8;

/// Scores the generator on the test split with noise drawn from
/// `config.eval.seed`.
pub fn evaluate(gan: &Gan, config: &Config, corpus: &Corpus, classifier: &EvalClassifier) -> Result<EvalReport> {
    let start = Instant::now();
    let test = corpus.indices(Split::Test);
    if test.len() < 2 {
        return Err(Error::Invalid("evaluation needs at least 2 test samples".into()));
    }
    if classifier.classes != gan.generator.config.classes {
        return Err(Error::Mismatch(format!(
            "classifier has {} classes, generator {}",
            classifier.classes, gan.generator.config.classes
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(config.eval.seed);
    let nd = gan.generator.config.noise_dim;
    let k = classifier.classes;
    let (mut l1, mut div, mut count) = (0.0f64, 0.0f64, 0usize);
    let mut probs = Vec::with_capacity(test.len());
    let mut hits = vec![0usize; k];
    let mut seen = vec![0usize; k];
    for chunk in test.chunks(EVAL_CHUNK) {
        let batch = corpus.batch(chunk, &vec![config.eval.source; chunk.len()])?;
        let z1 = sample_noise(chunk.len(), nd, &mut rng);
        let z2 = sample_noise(chunk.len(), nd, &mut rng);
        let g1 = gan.generate(&batch.fields, &z1, &batch.labels)?;
        let g2 = gan.generate(&batch.fields, &z2, &batch.labels)?;
        l1 += g1.data().iter().zip(batch.photos.data()).map(|(a, b)| (a - b).abs() as f64).sum::<f64>();
        div += g1.data().iter().zip(g2.data()).map(|(a, b)| (a - b).abs() as f64).sum::<f64>();
        count += g1.numel();
        let p = classifier.probabilities(&g1)?;
        for (row, &label) in p.iter().zip(&batch.labels) {
            seen[label] += 1;
            hits[label] += (argmax(row) == label) as usize;
        }
        probs.extend(p);
    }
    Ok(EvalReport {
        score: score_analogue(&probs)?,
        per_class_accuracy: hits
            .iter()
            .zip(&seen)
            .map(|(&h, &s)| if s == 0 { 0.0 } else { h as f64 / s as f64 })
            .collect(),
        mean_l1: l1 / count as f64,
        diversity: div / count as f64,
        samples: test.len(),
        wall_clock_s: start.elapsed().as_secs_f64(),
    })
}
