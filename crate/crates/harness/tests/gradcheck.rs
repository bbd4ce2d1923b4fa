use mrugan_harness::gradcheck_suite;

#[test]
fn suite_covers_every_block_and_passes() {
    let entries = gradcheck_suite(2).unwrap();
    let names: Vec<_> = entries.iter().map(|e| e.name.as_str()).collect();
    for want in [
        "conv2d",
        "cond_instance_norm",
        "mru_forward/sigmoid",
        "mru_forward/leaky-norm",
        "generator/sigmoid",
        "discriminator/sketch",
        "loss/gan_d",
        "loss/gan_g",
        "loss/focal_ac",
        "loss/l1",
        "loss/perceptual",
        "loss/diversity",
        "loss/dragan",
    ] {
        assert!(names.contains(&want), "missing {want}");
    }
    for e in &entries {
        assert_eq!(e.draws, 2);
        assert!(e.passed(), "{} failed draws {:?} (max rel err {})", e.name, e.failed, e.max_rel_err);
    }
}
