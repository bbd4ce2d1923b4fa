use std::fs;
use std::path::Path;
use std::process::{Command, Output};

const TINY: &str = r#"
data.classes = 2
data.per_class = 6
data.resolution = 16
train.iterations = 3
train.batch_size = 2
train.checkpoint_every = 2
generator.resolution = 16
generator.classes = 2
generator.encoder = [4, 8]
generator.decoder = [8, 4]
generator.noise_dim = 4
generator.depth = 1
discriminator.resolution = 16
discriminator.classes = 2
discriminator.channels = [4, 8]
discriminator.depth = 1
eval.classifier_iterations = 4
eval.classifier_batch = 4
classify.iterations = 2
classify.batch_size = 4
classify.channels = [4, 8]
"#;

fn mrugan(config: &Path, out: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mrugan"))
        .arg("--config")
        .arg(config)
        .arg("--out")
        .arg(out)
        .args(args)
        .output()
        .unwrap()
}

fn ok(o: Output) -> String {
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    String::from_utf8_lossy(&o.stdout).into_owned()
}

#[test]
fn full_pipeline_on_a_tiny_corpus() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("tiny.toml");
    fs::write(&cfg, TINY).unwrap();
    let data = dir.path().join("data");
    let run = dir.path().join("run");
    let data_s = data.to_str().unwrap();

    ok(mrugan(&cfg, &data, &["synth-data"]));
    assert_eq!(fs::read_to_string(data.join("manifest.jsonl")).unwrap().lines().count(), 12);

    ok(mrugan(&cfg, &run, &["train", "--data", data_s, "--quiet"]));
    let csv = fs::read_to_string(run.join("metrics.csv")).unwrap();
    assert!(csv.starts_with("iteration,p_sketch,"));
    assert_eq!(csv.lines().count(), 4);
    assert!(run.join("config.toml").exists() && run.join("final.ckpt").exists());

    let ckpt = run.join("final.ckpt");
    let ckpt_s = ckpt.to_str().unwrap();
    ok(mrugan(&cfg, &run, &["eval", "--checkpoint", ckpt_s, "--data", data_s]));
    let report: serde_json::Value = serde_json::from_str(&fs::read_to_string(run.join("report.json")).unwrap()).unwrap();
    assert!(report["score"].as_f64().unwrap() >= 1.0);

    ok(mrugan(&cfg, &run, &["sample", "--checkpoint", ckpt_s, "--data", data_s, "--rows", "2"]));
    assert!(run.join("samples.png").exists());

    let photo = data.join("photo").join("ellipse-0000.png");
    ok(mrugan(&cfg, &run, &["augment", photo.to_str().unwrap()]));
    assert!(run.join("ellipse-0000-field.png").exists());
}

#[test]
fn seed_flag_changes_the_run_and_bad_input_fails() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("tiny.toml");
    fs::write(&cfg, TINY).unwrap();
    let data = dir.path().join("data");
    ok(mrugan(&cfg, &data, &["synth-data"]));
    let data_s = data.to_str().unwrap();
    let log = |seed: &str, name: &str| {
        let out = dir.path().join(name);
        ok(mrugan(&cfg, &out, &["--seed", seed, "train", "--data", data_s, "--quiet"]));
        fs::read_to_string(out.join("metrics.csv")).unwrap()
    };
    assert_eq!(log("3", "a"), log("3", "b"));
    assert_ne!(log("3", "a"), log("4", "c"));

    let bad = mrugan(&cfg, &dir.path().join("x"), &["--set", "train.batch_size=0", "train", "--data", data_s]);
    assert_eq!(bad.status.code(), Some(2));
    let missing = mrugan(&cfg, &dir.path().join("x"), &["eval", "--checkpoint", "nope.ckpt", "--data", data_s]);
    assert_eq!(missing.status.code(), Some(2));
}
