#![allow(dead_code)]

use std::path::Path;

use mrugan_data::{build_corpus, Corpus};
use mrugan_harness::Config;

pub const TINY: &[&str] = &[
    "data.classes = 2",
    "data.per_class = 6",
    "data.resolution = 16",
    "train.iterations = 3",
    "train.batch_size = 2",
    "train.checkpoint_every = 2",
    "generator.resolution = 16",
    "generator.classes = 2",
    "generator.encoder = [4, 8]",
    "generator.decoder = [8, 4]",
    "generator.noise_dim = 4",
    "generator.depth = 1",
    "discriminator.resolution = 16",
    "discriminator.classes = 2",
    "discriminator.channels = [4, 8]",
    "discriminator.depth = 1",
    "eval.classifier_iterations = 4",
    "eval.classifier_batch = 4",
    "classify.iterations = 3",
    "classify.batch_size = 4",
    "classify.channels = [4, 8]",
];

pub fn tiny_config(extra: &[&str]) -> Config {
    let overrides: Vec<String> = extra.iter().map(|s| s.to_string()).collect();
    Config::parse_with(&TINY.join("\n"), &overrides).unwrap()
}

pub fn tiny_corpus(dir: &Path) -> Corpus {
    let m = build_corpus(dir, 2, 6, 16, 11).unwrap();
    Corpus::load(&m).unwrap()
}
