//! Term-removal and block-type comparisons trained on identical data and
//! seeds.

use std::path::Path;

use mrugan_data::Corpus;
use mrugan_model::BlockKind;
use serde::{Deserialize, Serialize};

use crate::{evaluate, train, Config, EvalClassifier, EvalReport, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Variant {
    /// No adversarial loss and no discriminator.
    NoGan,
    /// No class supervision on either network.
    NoAc,
    /// No L1 and no perceptual loss.
    NoP,
    NoDiv,
    /// Generator built from plain residual blocks.
    Residual,
}

impl Variant {
    pub const ALL: [Variant; 5] = [Variant::NoGan, Variant::NoAc, Variant::NoP, Variant::NoDiv, Variant::Residual];

    pub fn name(self) -> &'static str {
        match self {
            Variant::NoGan => "-GAN",
            Variant::NoAc => "-L-AC",
            Variant::NoP => "-P",
            Variant::NoDiv => "-DIV",
            Variant::Residual => "residual",
        }
    }

    pub fn parse(s: &str) -> Option<Variant> {
        let key = s.trim().trim_start_matches('-').to_ascii_lowercase();
        Some(match key.as_str() {
            "gan" => Variant::NoGan,
            "l-ac" | "lac" | "ac" => Variant::NoAc,
            "p" => Variant::NoP,
            "div" => Variant::NoDiv,
            "residual" => Variant::Residual,
            _ => return None,
        })
    }

    pub fn apply(self, base: &Config) -> Config {
        let mut c = base.clone();
        let on = &mut c.loss.enable;
        match self {
            Variant::NoGan => {
                on.gan = false;
                on.gp = false;
                on.ac = false;
            }
            Variant::NoAc => on.ac = false,
            Variant::NoP => {
                on.l1 = false;
                on.perceptual = false;
            }
            Variant::NoDiv => on.diversity = false,
            Variant::Residual => c.generator.block = BlockKind::Residual,
        }
        c
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AblationRow {
    pub name: String,
    pub generator_params: usize,
    pub report: EvalReport,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AblationTable {
    pub rows: Vec<AblationRow>,
}

impl AblationTable {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("variant,generator_params,score,mean_l1,diversity,class_accuracy\n");
        for r in &self.rows {
            let acc = r.report.per_class_accuracy.iter().sum::<f64>() / r.report.per_class_accuracy.len().max(1) as f64;
            out.push_str(&format!(
                "{},{},{:.6},{:.6},{:.6},{:.6}\n",
                r.name, r.generator_params, r.report.score, r.report.mean_l1, r.report.diversity, acc
            ));
        }
        out
    }
}

/// Trains the base configuration and every variant with the same seed and
/// corpus, then evaluates each with the same frozen classifier. Each run
/// writes into `out/<name>` when `out` is given.
pub fn run_ablation(
    base: &Config,
    variants: &[Variant],
    corpus: &Corpus,
    classifier: &EvalClassifier,
    out: Option<&Path>,
    mut progress: impl FnMut(&str, &crate::MetricsRow),
) -> Result<AblationTable> {
    let mut runs = vec![("full".to_string(), base.clone())];
    runs.extend(variants.iter().map(|v| (v.name().to_string(), v.apply(base))));
    let mut rows = Vec::with_capacity(runs.len());
    for (name, cfg) in runs {
        let dir = out.map(|d| d.join(name.trim_start_matches('-').to_ascii_lowercase()));
        let outcome = train(&cfg, corpus, dir.as_deref(), |row| progress(&name, row))?;
        let report = evaluate(&outcome.gan, &cfg, corpus, classifier)?;
        rows.push(AblationRow {
            generator_params: outcome.gan.g_params.numel(),
            name,
            report,
        });
    }
    Ok(AblationTable { rows })
}
