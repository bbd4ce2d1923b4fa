//! Run configuration: a flat `section.key = value` file (TOML dotted keys),
//! every key optional, plus command-line overrides in the same syntax.

use std::path::Path;

use mrugan_data::ScheduleMode;
use mrugan_model::{DiscriminatorConfig, GeneratorConfig, LossWeights};
use serde::{Deserialize, Serialize};
use toml::{Table, Value};

use crate::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    pub seed: u64,
    pub data: DataConfig,
    pub train: TrainSettings,
    pub schedule: ScheduleConfig,
    pub loss: LossWeights,
    pub generator: GeneratorConfig,
    pub discriminator: DiscriminatorConfig,
    pub eval: EvalConfig,
    pub classify: ClassifyConfig,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DataConfig {
    pub classes: usize,
    pub per_class: usize,
    pub resolution: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainSettings {
    pub iterations: usize,
    pub batch_size: usize,
    pub lr_g: f64,
    pub lr_d: f64,
    pub beta1: f64,
    pub beta2: f64,
    /// Iterations between checkpoints; 0 writes only the final one.
    pub checkpoint_every: usize,
    /// Random joint left-right flips of photo and field.
    pub flip: bool,
    /// Seed of the frozen perceptual feature extractor.
    pub feature_seed: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ScheduleKind {
    Ramp,
    PretrainFinetune,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScheduleConfig {
    pub lambda: f64,
    /// Ramp length; 0 means the run length.
    pub i_max: usize,
    pub mode: ScheduleKind,
    /// Fraction of the run spent on edge maps in pretrain-finetune mode.
    pub switch: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalConfig {
    pub classifier_iterations: usize,
    pub classifier_batch: usize,
    pub classifier_lr: f64,
    pub seed: u64,
    /// Fields fed to the generator at evaluation.
    pub source: mrugan_data::Source,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ClassifyConfig {
    pub iterations: usize,
    pub batch_size: usize,
    pub lr: f64,
    /// Output channels of the stride-2 blocks.
    pub channels: Vec<usize>,
    pub depth: usize,
}

impl Default for Config {
    fn default() -> Self {
        Config {
            seed: 0,
            data: DataConfig::default(),
            train: TrainSettings::default(),
            schedule: ScheduleConfig::default(),
            loss: LossWeights::default(),
            generator: GeneratorConfig::default(),
            discriminator: DiscriminatorConfig::default(),
            eval: EvalConfig::default(),
            classify: ClassifyConfig::default(),
        }
    }
}

impl Default for DataConfig {
    fn default() -> Self {
        DataConfig { classes: 4, per_class: 100, resolution: 32 }
    }
}

impl Default for TrainSettings {
    fn default() -> Self {
        TrainSettings {
            iterations: 2000,
            batch_size: 8,
            lr_g: 1e-4,
            lr_d: 2e-4,
            beta1: 0.5,
            beta2: 0.999,
            checkpoint_every: 500,
            flip: true,
            feature_seed: 7,
        }
    }
}

impl Default for ScheduleConfig {
    fn default() -> Self {
        ScheduleConfig { lambda: 1.0, i_max: 0, mode: ScheduleKind::Ramp, switch: 0.5 }
    }
}

impl Default for EvalConfig {
    fn default() -> Self {
        EvalConfig {
            classifier_iterations: 600,
            classifier_batch: 32,
            classifier_lr: 2e-3,
            seed: 1234,
            source: mrugan_data::Source::Sketch,
        }
    }
}

impl Default for ClassifyConfig {
    fn default() -> Self {
        ClassifyConfig { iterations: 2000, batch_size: 8, lr: 1e-3, channels: vec![16, 32, 64], depth: 1 }
    }
}

fn merge(into: &mut Table, from: Table) {
    for (k, v) in from {
        match (into.get_mut(&k), v) {
            (Some(Value::Table(a)), Value::Table(b)) => merge(a, b),
            (_, v) => {
                into.insert(k, v);
            }
        }
    }
}

/// `key=value` as a one-line document; unquoted words become strings.
fn parse_override(item: &str) -> Result<Table> {
    let (key, value) = item
        .split_once('=')
        .ok_or_else(|| Error::Config(format!("override {item:?} is not key=value")))?;
    let (key, value) = (key.trim(), value.trim());
    let doc = format!("{key} = {value}");
    doc.parse::<Table>()
        .or_else(|_| format!("{key} = {}", Value::String(value.into())).parse::<Table>())
        .map_err(|e| Error::Config(format!("override {item:?}: {e}")))
}

impl Config {
    pub fn parse(text: &str) -> Result<Self> {
        Self::parse_with(text, &[])
    }

    /// Parses `text` one `key = value` line at a time (`#` starts a
    /// comment), then applies each override in order.
    pub fn parse_with(text: &str, overrides: &[String]) -> Result<Self> {
        let mut table = Table::new();
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let item = parse_override(line).map_err(|e| Error::Config(format!("line {}: {e}", i + 1)))?;
            merge(&mut table, item);
        }
        for o in overrides {
            merge(&mut table, parse_override(o)?);
        }
        let cfg: Config = table.try_into().map_err(|e: toml::de::Error| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>, overrides: &[String]) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| Error::Io { path: path.to_path_buf(), source })?;
        Self::parse_with(&text, overrides).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }

    /// Canonical text form; `parse(to_text())` reproduces the config.
    pub fn to_text(&self) -> String {
        let value = Value::try_from(self).expect("config serializes");
        let mut out = String::new();
        flatten("", &value, &mut out);
        out
    }

    pub fn schedule_mode(&self) -> ScheduleMode {
        match self.schedule.mode {
            ScheduleKind::Ramp => ScheduleMode::Ramp,
            ScheduleKind::PretrainFinetune => ScheduleMode::PretrainFinetune { switch: self.schedule.switch },
        }
    }

    pub fn i_max(&self) -> usize {
        if self.schedule.i_max == 0 { self.train.iterations } else { self.schedule.i_max }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        let t = &self.train;
        if t.iterations == 0 || t.batch_size == 0 {
            return bad("train.iterations and train.batch_size must be positive".into());
        }
        if !(t.lr_g > 0.0 && t.lr_d > 0.0) {
            return bad(format!("learning rates must be positive (lr_g {}, lr_d {})", t.lr_g, t.lr_d));
        }
        if !(0.0..1.0).contains(&t.beta1) || !(0.0..1.0).contains(&t.beta2) {
            return bad("Adam betas must lie in [0, 1)".into());
        }
        let k = self.data.classes;
        if self.generator.classes != k || self.discriminator.classes != k {
            return bad(format!(
                "class counts disagree: data {k}, generator {}, discriminator {}",
                self.generator.classes, self.discriminator.classes
            ));
        }
        let r = self.data.resolution;
        if self.generator.resolution != r || self.discriminator.resolution != r {
            return bad(format!(
                "resolutions disagree: data {r}, generator {}, discriminator {}",
                self.generator.resolution, self.discriminator.resolution
            ));
        }
        if !(self.schedule.lambda > 0.0) || !(0.0..=1.0).contains(&self.schedule.switch) {
            return bad("schedule.lambda must be positive and schedule.switch in [0, 1]".into());
        }
        if self.eval.classifier_batch < 2 || self.classify.channels.is_empty() || self.classify.batch_size == 0 {
            return bad("eval.classifier_batch >= 2 and a non-empty classify.channels are required".into());
        }
        let on = &self.loss.enable;
        if !(on.gan || on.ac || on.l1 || on.perceptual || on.diversity) {
            return bad("every generator loss term is disabled".into());
        }
        self.loss.validate()?;
        self.generator.validate()?;
        self.discriminator.validate()?;
        Ok(())
    }
}

fn flatten(prefix: &str, v: &Value, out: &mut String) {
    match v {
        Value::Table(t) => {
            for (k, v) in t {
                let key = if prefix.is_empty() { k.clone() } else { format!("{prefix}.{k}") };
                flatten(&key, v, out);
            }
        }
        other => out.push_str(&format!("{prefix} = {other}\n")),
    }
}
