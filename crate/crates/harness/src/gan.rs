//! Generator and discriminator together with their parameters.

use std::path::Path;

use mrugan_core::{Checkpoint, Tape, Tensor};
use mrugan_model::{make_pyramid, Discriminator, Generator, ParamStore};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::{Config, Error, Result};

pub struct Gan {
    pub generator: Generator,
    pub g_params: ParamStore<f32>,
    pub discriminator: Discriminator,
    pub d_params: ParamStore<f32>,
}

const CONFIG_KEY: &str = "config";
const ITERATION_KEY: &str = "iteration";

impl Gan {
    /// Fresh networks initialized from `config.seed`.
    pub fn new(config: &Config) -> Result<Self> {
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed ^ 0x6d72_7567_616e);
        let mut g_params = ParamStore::new();
        let generator = Generator::new(config.generator.clone(), &mut g_params, &mut rng)?;
        let mut d_params = ParamStore::new();
        let discriminator = Discriminator::new(config.discriminator.clone(), &mut d_params, &mut rng)?;
        Ok(Gan { generator, g_params, discriminator, d_params })
    }

    pub fn to_checkpoint(&self, config: &Config, iteration: usize) -> Checkpoint {
        let mut ck = Checkpoint::new();
        self.g_params.save_into(&mut ck, "generator");
        self.d_params.save_into(&mut ck, "discriminator");
        ck.meta.insert(CONFIG_KEY.into(), config.to_text());
        ck.scalars.insert(ITERATION_KEY.into(), iteration as f64);
        ck
    }

    pub fn save(&self, config: &Config, iteration: usize, path: impl AsRef<Path>) -> Result<()> {
        Ok(self.to_checkpoint(config, iteration).save(path)?)
    }

    /// Builds the networks `config` describes and fills them from `ck`.
    pub fn from_checkpoint(ck: &Checkpoint, config: &Config) -> Result<Self> {
        let mut gan = Gan::new(config)?;
        gan.g_params
            .load_from(ck, "generator")
            .map_err(|e| Error::Mismatch(format!("generator: {e}")))?;
        gan.d_params
            .load_from(ck, "discriminator")
            .map_err(|e| Error::Mismatch(format!("discriminator: {e}")))?;
        Ok(gan)
    }

    /// Loads a checkpoint with the configuration stored inside it.
    pub fn load(path: impl AsRef<Path>) -> Result<(Self, Config)> {
        let ck = Checkpoint::load(path)?;
        let config = stored_config(&ck)?;
        Ok((Gan::from_checkpoint(&ck, &config)?, config))
    }

    /// Generator output for plain tensors, without recording gradients.
    pub fn generate(&self, fields: &Tensor<f32>, noise: &Tensor<f32>, labels: &[usize]) -> Result<Tensor<f32>> {
        let tape = Tape::new();
        tape.no_grad(|| {
            let p = self.g_params.bind_frozen(&tape);
            let pyramid = make_pyramid(tape.constant(fields.clone()), self.generator.config.levels())?;
            let y = self.generator.forward(&p, &pyramid, tape.constant(noise.clone()), labels)?;
            Ok(std::rc::Rc::unwrap_or_clone(y.value()))
        })
    }
}

pub fn stored_config(ck: &Checkpoint) -> Result<Config> {
    let text = ck
        .meta
        .get(CONFIG_KEY)
        .ok_or_else(|| Error::Mismatch("checkpoint carries no configuration".into()))?;
    Config::parse(text)
}

pub fn stored_iteration(ck: &Checkpoint) -> Option<usize> {
    ck.scalars.get(ITERATION_KEY).map(|&v| v as usize)
}
