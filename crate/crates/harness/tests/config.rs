mod common;

use common::tiny_config;
use mrugan_data::Source;
use mrugan_harness::{Config, ScheduleKind};
use mrugan_model::GateKind;

#[test]
fn defaults_match_the_desk_scale_setup() {
    let c = Config::default();
    c.validate().unwrap();
    assert_eq!((c.data.classes, c.data.resolution), (4, 32));
    assert_eq!((c.train.iterations, c.train.batch_size), (2000, 8));
    assert_eq!((c.train.lr_g, c.train.lr_d), (1e-4, 2e-4));
    assert_eq!(c.generator.encoder, vec![32, 64, 128]);
    assert_eq!(c.generator.noise_dim, 64);
    assert_eq!(c.i_max(), 2000);
    assert_eq!(Config::parse("").unwrap(), c);
}

#[test]
fn lines_and_overrides_are_merged_in_order() {
    let text = "# comment\nseed = 5\ntrain.lr_g = 3e-4\n\ngenerator.gate = leaky-norm\nschedule.mode = \"pretrain-finetune\"\n";
    let c = Config::parse_with(text, &["seed=9".into(), "eval.source = edge".into(), "loss.enable.diversity=false".into()]).unwrap();
    assert_eq!(c.seed, 9);
    assert_eq!(c.train.lr_g, 3e-4);
    assert_eq!(c.generator.gate, GateKind::LeakyNorm);
    assert_eq!(c.schedule.mode, ScheduleKind::PretrainFinetune);
    assert_eq!(c.eval.source, Source::Edge);
    assert!(!c.loss.enable.diversity);
    assert!(c.loss.enable.gan);
}

#[test]
fn text_form_round_trips() {
    let c = tiny_config(&["loss.gp = 2.5", "schedule.lambda = 0.5"]);
    let back = Config::parse(&c.to_text()).unwrap();
    assert_eq!(back, c);
    assert_eq!(Config::parse(&Config::default().to_text()).unwrap(), Config::default());
}

#[test]
fn unknown_keys_and_bad_values_are_rejected() {
    assert!(Config::parse("train.iteratons = 3").is_err());
    assert!(Config::parse("nonsense").is_err());
    assert!(Config::parse("train.lr_g = 0").is_err());
    assert!(Config::parse("train.iterations = 0").is_err());
    assert!(Config::parse("data.classes = 3").is_err(), "class counts must agree");
    assert!(Config::parse("generator.resolution = 64").is_err());
    assert!(Config::parse("train.beta1 = 1.0").is_err());
    assert!(Config::parse("loss.enable.gan = false\nloss.enable.ac = false\nloss.enable.gp = false\nloss.enable.l1 = false\nloss.enable.perceptual = false\nloss.enable.diversity = false").is_err());
}

#[test]
fn load_reads_a_file() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("run.toml");
    std::fs::write(&path, "seed = 3\ntrain.iterations = 7\n").unwrap();
    let c = Config::load(&path, &["train.batch_size=4".into()]).unwrap();
    assert_eq!((c.seed, c.train.iterations, c.train.batch_size), (3, 7, 4));
    assert!(Config::load(dir.path().join("missing.toml"), &[]).is_err());
}
