//! Alternating discriminator / generator updates with the sketch curriculum.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use mrugan_core::{adam_step, AdamState, Tape, Tensor, Var};
use mrugan_data::{draw_batch_sources, Corpus, ScheduleState, Source, Split};
use mrugan_model::{
    diversity_loss, dragan_penalty, focal_ac_loss, gan_loss_d, gan_loss_g, l1_loss, make_pyramid,
    perceptual_loss, sample_noise, total_d, total_g, DTerms, FeatureExtractor, GTerms, Term,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::{io_err, Config, Error, Gan, Result};

/// One row of the metrics log. Disabled terms are logged as 0.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricsRow {
    pub iteration: usize,
    pub p_sketch: f64,
    pub sketch_slots: usize,
    pub d_total: f64,
    pub d_gan: f64,
    pub d_ac: f64,
    pub d_gp: f64,
    pub g_total: f64,
    pub g_gan: f64,
    pub g_ac: f64,
    pub g_l1: f64,
    pub g_perceptual: f64,
    pub g_diversity: f64,
}

pub struct TrainOutcome {
    pub gan: Gan,
    pub metrics: Vec<MetricsRow>,
    pub checkpoints: Vec<PathBuf>,
    pub seconds: f64,
}

pub struct Trainer<'c> {
    pub config: Config,
    pub gan: Gan,
    corpus: &'c Corpus,
    adam_g: AdamState<f32>,
    adam_d: AdamState<f32>,
    extractor: FeatureExtractor,
    rng: ChaCha8Rng,
    train_indices: Vec<usize>,
    pub iteration: usize,
}

fn checked<'t>(term: Term, iteration: usize, v: Var<'t, f32>) -> Result<Var<'t, f32>> {
    if v.item().is_finite() {
        Ok(v)
    } else {
        Err(Error::NonFinite { term: term.name(), iteration })
    }
}

fn value(v: Option<Var<'_, f32>>) -> f64 {
    v.map_or(0.0, |v| v.item() as f64)
}

impl<'c> Trainer<'c> {
    pub fn new(config: &Config, corpus: &'c Corpus) -> Result<Self> {
        config.validate()?;
        if corpus.resolution != config.data.resolution {
            return Err(Error::Config(format!(
                "corpus resolution {} but data.resolution {}",
                corpus.resolution, config.data.resolution
            )));
        }
        if corpus.classes > config.data.classes {
            return Err(Error::Config(format!(
                "corpus has {} classes but data.classes is {}",
                corpus.classes, config.data.classes
            )));
        }
        let train_indices = corpus.indices(Split::Train);
        if train_indices.is_empty() {
            return Err(Error::Invalid("corpus has no training samples".into()));
        }
        let gan = Gan::new(config)?;
        let t = &config.train;
        let adam_g = AdamState::new(gan.g_params.values(), t.beta1, t.beta2, 1e-8);
        let adam_d = AdamState::new(gan.d_params.values(), t.beta1, t.beta2, 1e-8);
        Ok(Trainer {
            config: config.clone(),
            extractor: FeatureExtractor::new(t.feature_seed),
            rng: ChaCha8Rng::seed_from_u64(config.seed ^ 0x7472_6169_6e),
            gan,
            corpus,
            adam_g,
            adam_d,
            train_indices,
            iteration: 0,
        })
    }

    /// One discriminator update followed by one generator update.
    pub fn step(&mut self) -> Result<MetricsRow> {
        let cfg = &self.config;
        let it = self.iteration;
        let b = cfg.train.batch_size;
        let i_max = cfg.i_max();
        let state = ScheduleState::new(it.min(i_max), i_max, cfg.schedule.lambda)?;
        let p_sketch = cfg.schedule_mode().sketch_probability(&state)?;
        let sources = draw_batch_sources(p_sketch, b, &mut self.rng);
        let picks: Vec<usize> = (0..b)
            .map(|_| self.train_indices[self.rng.random_range(0..self.train_indices.len())])
            .collect();
        let mut batch = self.corpus.batch(&picks, &sources)?;
        if cfg.train.flip {
            let flips: Vec<bool> = (0..b).map(|_| self.rng.random_bool(0.5)).collect();
            batch.flip_horizontal(&flips);
        }
        let nd = cfg.generator.noise_dim;
        let z1: Tensor<f32> = sample_noise(b, nd, &mut self.rng);
        let z2: Tensor<f32> = sample_noise(b, nd, &mut self.rng);
        let on = cfg.loss.enable;
        let w = cfg.loss;
        let labels = &batch.labels;
        let gan = &mut self.gan;
        let disc = &gan.discriminator;
        let with_sketch = disc.config.condition_on_sketch;

        let mut row = MetricsRow {
            iteration: it,
            p_sketch,
            sketch_slots: sources.iter().filter(|&&s| s == Source::Sketch).count(),
            d_total: 0.0,
            d_gan: 0.0,
            d_ac: 0.0,
            d_gp: 0.0,
            g_total: 0.0,
            g_gan: 0.0,
            g_ac: 0.0,
            g_l1: 0.0,
            g_perceptual: 0.0,
            g_diversity: 0.0,
        };

        // Discriminator: trained whenever any of its terms is on.
        if on.gan || on.ac || on.gp {
            let fake = if on.gan { Some(gan.generate(&batch.fields, &z1, labels)?) } else { None };
            let tape = Tape::new();
            let p = gan.d_params.bind(&tape);
            let sketch = with_sketch.then(|| tape.constant(batch.fields.clone()));
            let real = disc.forward(&p, tape.constant(batch.photos.clone()), sketch)?;
            let mut terms = DTerms::default();
            if let Some(fake) = fake {
                let f = disc.forward(&p, tape.constant(fake), sketch)?;
                terms.gan = Some(checked(Term::GanD, it, gan_loss_d(real.gan, f.gan)?)?);
            }
            if on.ac {
                terms.ac = Some(checked(Term::AcD, it, focal_ac_loss(real.class, labels, w.focal_gamma)?)?);
            }
            if on.gp {
                let d = |x| Ok(disc.forward(&p, x, sketch)?.gan);
                let gp = dragan_penalty(&tape, d, &batch.photos, w.lambda_gp, w.perturb, &mut self.rng)?;
                terms.gp = Some(checked(Term::Gp, it, gp)?);
            }
            let total = total_d(&terms, &on)?;
            row.d_gan = value(terms.gan);
            row.d_ac = value(terms.ac);
            row.d_gp = value(terms.gp);
            row.d_total = total.item() as f64;
            let grads = tape.gradients(total, p.vars())?;
            adam_step(gan.d_params.values_mut(), &grads, &mut self.adam_d, cfg.train.lr_d)?;
        }

        // Generator.
        let tape = Tape::new();
        let pg = gan.g_params.bind(&tape);
        let pd = gan.d_params.bind_frozen(&tape);
        let g = &gan.generator;
        let pyramid = make_pyramid(tape.constant(batch.fields.clone()), g.config.levels())?;
        let fake = g.forward(&pg, &pyramid, tape.constant(z1), labels)?;
        let real = tape.constant(batch.photos.clone());
        let mut terms = GTerms::default();
        if on.gan || on.ac {
            let sketch = with_sketch.then(|| tape.constant(batch.fields.clone()));
            let out = disc.forward(&pd, fake, sketch)?;
            if on.gan {
                terms.gan = Some(checked(Term::GanG, it, gan_loss_g(out.gan))?);
            }
            if on.ac {
                terms.ac = Some(checked(Term::AcG, it, focal_ac_loss(out.class, labels, w.focal_gamma)?)?);
            }
        }
        if on.l1 {
            terms.l1 = Some(checked(Term::L1, it, l1_loss(fake, real)?)?);
        }
        if on.perceptual {
            let p = perceptual_loss(&self.extractor, fake, real, w.lambda_p)?;
            terms.perceptual = Some(checked(Term::Perceptual, it, p)?);
        }
        if on.diversity {
            let other = g.forward(&pg, &pyramid, tape.constant(z2), labels)?;
            let d = diversity_loss(fake, other, w.lambda_div, w.div_cap)?;
            terms.diversity = Some(checked(Term::Diversity, it, d)?);
        }
        let total = total_g(&terms, &on)?;
        row.g_gan = value(terms.gan);
        row.g_ac = value(terms.ac);
        row.g_l1 = value(terms.l1);
        row.g_perceptual = value(terms.perceptual);
        row.g_diversity = value(terms.diversity);
        row.g_total = total.item() as f64;
        let grads = tape.gradients(total, pg.vars())?;
        adam_step(gan.g_params.values_mut(), &grads, &mut self.adam_g, cfg.train.lr_g)?;

        self.iteration += 1;
        Ok(row)
    }
}

/// Runs `config.train.iterations` steps. With `out`, writes `metrics.csv`
/// (flushed every row), periodic `checkpoint-<iter>.ckpt` files and
/// `final.ckpt`.
pub fn train(
    config: &Config,
    corpus: &Corpus,
    out: Option<&Path>,
    mut progress: impl FnMut(&MetricsRow),
) -> Result<TrainOutcome> {
    let start = Instant::now();
    let mut trainer = Trainer::new(config, corpus)?;
    let mut writer = match out {
        Some(dir) => {
            fs::create_dir_all(dir).map_err(io_err(dir))?;
            let path = dir.join("metrics.csv");
            let w = csv::Writer::from_path(&path).map_err(|source| Error::Csv { path: path.clone(), source })?;
            Some((w, path))
        }
        None => None,
    };
    let mut metrics = Vec::with_capacity(config.train.iterations);
    let mut checkpoints = Vec::new();
    let every = config.train.checkpoint_every;
    for _ in 0..config.train.iterations {
        let row = trainer.step()?;
        if let Some((w, path)) = writer.as_mut() {
            let csv_err = |source| Error::Csv { path: path.clone(), source };
            w.serialize(&row).map_err(csv_err)?;
            w.flush().map_err(io_err(path))?;
        }
        progress(&row);
        metrics.push(row);
        let done = trainer.iteration;
        if let Some(dir) = out {
            if every > 0 && done % every == 0 && done < config.train.iterations {
                let path = dir.join(format!("checkpoint-{done:06}.ckpt"));
                trainer.gan.save(config, done, &path)?;
                checkpoints.push(path);
            }
        }
    }
    if let Some(dir) = out {
        let path = dir.join("final.ckpt");
        trainer.gan.save(config, trainer.iteration, &path)?;
        checkpoints.push(path);
    }
    Ok(TrainOutcome {
        gan: trainer.gan,
        metrics,
        checkpoints,
        seconds: start.elapsed().as_secs_f64(),
    })
}

pub fn read_metrics(path: impl AsRef<Path>) -> Result<Vec<MetricsRow>> {
    let path = path.as_ref();
    let csv_err = |source| Error::Csv { path: path.to_path_buf(), source };
    let mut r = csv::Reader::from_path(path).map_err(csv_err)?;
    r.deserialize().map(|row| row.map_err(csv_err)).collect()
}
