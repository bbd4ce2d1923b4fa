mod common;

use common::{tiny_config, tiny_corpus};
use mrugan_harness::{run_ablation, EvalClassifier, Variant};
use mrugan_model::BlockKind;

#[test]
fn variants_switch_the_documented_terms() {
    let base = tiny_config(&[]);
    let g = Variant::NoGan.apply(&base).loss.enable;
    assert!(!g.gan && !g.gp && !g.ac && g.l1 && g.perceptual && g.diversity);
    let a = Variant::NoAc.apply(&base).loss.enable;
    assert!(!a.ac && a.gan && a.gp);
    let p = Variant::NoP.apply(&base).loss.enable;
    assert!(!p.l1 && !p.perceptual && p.gan && p.diversity);
    let d = Variant::NoDiv.apply(&base).loss.enable;
    assert!(!d.diversity && d.l1);
    let r = Variant::Residual.apply(&base);
    assert_eq!(r.generator.block, BlockKind::Residual);
    assert_eq!(r.loss, base.loss);
    for v in Variant::ALL {
        v.apply(&base).validate().unwrap();
        assert_eq!(Variant::parse(v.name()), Some(v));
    }
    assert_eq!(Variant::parse("div"), Some(Variant::NoDiv));
    assert_eq!(Variant::parse("bogus"), None);
}

#[test]
fn table_has_one_row_per_variant_plus_base() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = tiny_corpus(&dir.path().join("data"));
    let cfg = tiny_config(&["train.iterations = 2"]);
    let classifier = EvalClassifier::train(&corpus, &cfg.eval).unwrap();

    let empty = run_ablation(&cfg, &[], &corpus, &classifier, None, |_, _| {}).unwrap();
    assert_eq!(empty.rows.len(), 1);
    assert_eq!(empty.rows[0].name, "full");

    let variants = [Variant::NoDiv, Variant::Residual];
    let out = dir.path().join("ablate");
    let table = run_ablation(&cfg, &variants, &corpus, &classifier, Some(&out), |_, _| {}).unwrap();
    assert_eq!(table.rows.len(), variants.len() + 1);
    assert!(table.rows[0].report.same_result(&empty.rows[0].report), "base row is reproducible");
    assert!(out.join("full/metrics.csv").exists() && out.join("div/final.ckpt").exists());
    assert!(table.rows[2].generator_params < table.rows[0].generator_params);
    let csv = table.to_csv();
    assert_eq!(csv.lines().count(), 4);
    assert!(csv.starts_with("variant,generator_params,score"));
}
