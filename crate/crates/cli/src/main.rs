use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use mrugan_augment::{augment_pipeline, io as png_io, AugmentConfig, AugmentInput};
use mrugan_core::Checkpoint;
use mrugan_data::{build_corpus, Corpus, Manifest};
use mrugan_harness::{
    classify_mode, evaluate, gradcheck_suite, run_ablation, sample_grid, train, Config, EvalClassifier, Gan,
    Variant,
};

type AnyResult<T> = Result<T, Box<dyn std::error::Error>>;

/// Sketch-to-image GAN built from masked residual units.
#[derive(Parser)]
#[command(name = "mrugan", version)]
struct Cli {
    /// Config file of `section.key = value` lines.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides the config's seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true, default_value = "runs")]
    out: PathBuf,
    /// Extra `key=value` config overrides, applied after the file.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    set: Vec<String>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Render the synthetic paired corpus into --out.
    SynthData,
    /// Turn photos (or edge-probability maps) into distance-field PNGs.
    Augment {
        inputs: Vec<PathBuf>,
        /// Inputs are grayscale edge maps rather than photos.
        #[arg(long)]
        edges: bool,
    },
    /// Train the GAN; writes metrics.csv and checkpoints into --out.
    Train {
        /// Corpus directory or manifest written by synth-data
        #[arg(long)]
        data: PathBuf,
        /// Suppress per-iteration progress lines.
        #[arg(long)]
        quiet: bool,
    },
    /// Score a checkpoint on the test split; writes report.json.
    Eval {
        /// Checkpoint written by train
        #[arg(long)]
        checkpoint: PathBuf,
        /// Corpus directory or manifest written by synth-data
        #[arg(long)]
        data: PathBuf,
    },
    /// Train the full model and term-removal variants on the same seed.
    Ablate {
        /// Corpus directory or manifest written by synth-data
        #[arg(long)]
        data: PathBuf,
        /// Variants to run (gan, l-ac, p, div, residual); all when omitted.
        #[arg(long, value_delimiter = ',')]
        variants: Vec<String>,
    },
    /// Train MRU-stack classifiers and the residual baseline.
    Classify {
        /// Corpus directory or manifest written by synth-data
        #[arg(long)]
        data: PathBuf,
    },
    /// Finite-difference gradient checks of every layer and loss.
    Gradcheck {
        #[arg(long, default_value_t = 10)]
        draws: usize,
    },
    /// Write an image grid: sketch, two generations, ground truth.
    Sample {
        /// Checkpoint written by train
        #[arg(long)]
        checkpoint: PathBuf,
        /// Corpus directory or manifest written by synth-data
        #[arg(long)]
        data: PathBuf,
        #[arg(long, default_value_t = 8)]
        rows: usize,
    },
}

fn load_config(cli: &Cli) -> AnyResult<Config> {
    let mut overrides = cli.set.clone();
    if let Some(seed) = cli.seed {
        overrides.push(format!("seed={seed}"));
    }
    Ok(match &cli.config {
        Some(path) => Config::load(path, &overrides)?,
        None => Config::parse_with("", &overrides)?,
    })
}

fn load_corpus(dir: &Path) -> AnyResult<Corpus> {
    Ok(Corpus::load(&Manifest::load(dir)?)?)
}

fn write_json(path: &Path, value: &impl serde::Serialize) -> AnyResult<()> {
    fs::write(path, serde_json::to_string_pretty(value)? + "\n")?;
    Ok(())
}

/// Loads the evaluation classifier cached in `out`, training it first if
/// it is missing.
fn eval_classifier(out: &Path, corpus: &Corpus, cfg: &Config) -> AnyResult<EvalClassifier> {
    let path = out.join("eval-classifier.ckpt");
    if path.exists() {
        let net = EvalClassifier::load_from(&Checkpoint::load(&path)?)?;
        if net.classes == corpus.classes {
            return Ok(net);
        }
    }
    eprintln!("training evaluation classifier ({} iterations)", cfg.eval.classifier_iterations);
    let net = EvalClassifier::train(corpus, &cfg.eval)?;
    let mut ck = Checkpoint::new();
    net.save_into(&mut ck);
    ck.save(&path)?;
    Ok(net)
}

fn run(cli: Cli) -> AnyResult<bool> {
    let out = cli.out.as_path();
    fs::create_dir_all(out)?;
    match &cli.command {
        Command::SynthData => {
            let cfg = load_config(&cli)?;
            let d = &cfg.data;
            let m = build_corpus(out, d.classes, d.per_class, d.resolution, cfg.seed)?;
            println!("{} samples in {}", m.entries.len(), out.display());
        }
        Command::Augment { inputs, edges } => {
            if inputs.is_empty() {
                return Err("no input images".into());
            }
            for input in inputs {
                let field = if *edges {
                    let g = png_io::read_gray(input)?;
                    let cfg = AugmentConfig::for_resolution(g.width.max(g.height));
                    augment_pipeline(AugmentInput::Edges(&g), &cfg)?
                } else {
                    let p = png_io::read_rgb(input)?;
                    let cfg = AugmentConfig::for_resolution(p.width.max(p.height));
                    augment_pipeline(AugmentInput::Photo(&p), &cfg)?
                };
                let stem = input.file_stem().and_then(|s| s.to_str()).unwrap_or("image");
                let path = out.join(format!("{stem}-field.png"));
                png_io::write_field(&path, &field)?;
                println!("{}", path.display());
            }
        }
        Command::Train { data, quiet } => {
            let cfg = load_config(&cli)?;
            let corpus = load_corpus(data)?;
            fs::write(out.join("config.toml"), cfg.to_text())?;
            let outcome = train(&cfg, &corpus, Some(out), |row| {
                if !quiet && (row.iteration % 50 == 0 || row.iteration + 1 == cfg.train.iterations) {
                    eprintln!(
                        "iter {:>6}  p_sk {:.3}  D {:.4}  G {:.4}  L1 {:.4}",
                        row.iteration, row.p_sketch, row.d_total, row.g_total, row.g_l1
                    );
                }
            })?;
            println!("{} iterations in {:.1}s", outcome.metrics.len(), outcome.seconds);
            for c in &outcome.checkpoints {
                println!("{}", c.display());
            }
        }
        Command::Eval { checkpoint, data } => {
            let (gan, cfg) = Gan::load(checkpoint)?;
            let corpus = load_corpus(data)?;
            let classifier = eval_classifier(out, &corpus, &cfg)?;
            let report = evaluate(&gan, &cfg, &corpus, &classifier)?;
            write_json(&out.join("report.json"), &report)?;
            println!("{}", serde_json::to_string_pretty(&report)?);
        }
        Command::Ablate { data, variants } => {
            let cfg = load_config(&cli)?;
            let corpus = load_corpus(data)?;
            let variants = if variants.is_empty() {
                Variant::ALL.to_vec()
            } else {
                variants
                    .iter()
                    .map(|v| Variant::parse(v).ok_or_else(|| format!("unknown variant {v:?}")))
                    .collect::<Result<_, _>>()?
            };
            let classifier = eval_classifier(out, &corpus, &cfg)?;
            let table = run_ablation(&cfg, &variants, &corpus, &classifier, Some(out), |name, row| {
                if row.iteration % 100 == 0 {
                    eprintln!("{name:>8} iter {:>6}  G {:.4}", row.iteration, row.g_total);
                }
            })?;
            fs::write(out.join("ablation.csv"), table.to_csv())?;
            write_json(&out.join("ablation.json"), &table)?;
            print!("{}", table.to_csv());
        }
        Command::Classify { data } => {
            let cfg = load_config(&cli)?;
            let corpus = load_corpus(data)?;
            let report = classify_mode(&cfg.classify, &corpus, cfg.seed)?;
            write_json(&out.join("classify.json"), &report)?;
            for r in &report.rows {
                println!("{:<16} params {:>8}  test accuracy {:.4}", r.name, r.params, r.test_accuracy);
            }
        }
        Command::Gradcheck { draws } => {
            let entries = gradcheck_suite(*draws)?;
            write_json(&out.join("gradcheck.json"), &entries)?;
            for e in &entries {
                let status = if e.passed() { "ok" } else { "FAILED" };
                println!("{:<26} draws {:>3}  max rel err {:.2e}  {status}", e.name, e.draws, e.max_rel_err);
            }
            return Ok(entries.iter().all(|e| e.passed()));
        }
        Command::Sample { checkpoint, data, rows } => {
            let (gan, cfg) = Gan::load(checkpoint)?;
            let corpus = load_corpus(data)?;
            let path = out.join("samples.png");
            sample_grid(&gan, &corpus, *rows, cfg.eval.seed, Some(&path))?;
            println!("{}", path.display());
        }
    }
    Ok(true)
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
