use mrugan_data::{draw_batch_sources, mix_ratio, ScheduleMode, ScheduleState, Source};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn state(i_cur: usize, i_max: usize, lambda: f64) -> ScheduleState {
    ScheduleState::new(i_cur, i_max, lambda).unwrap()
}

#[test]
fn ratio_at_start_end_and_midpoint() {
    for lambda in [0.3, 1.0, 2.5] {
        let r = mix_ratio(&state(0, 2000, lambda)).unwrap();
        assert_eq!(r.sketch, 0.1);
    }
    let end = mix_ratio(&state(2000, 2000, 1.0)).unwrap();
    assert!((end.sketch - 0.9).abs() < 1e-12);
    let mid = mix_ratio(&state(1000, 2000, 1.0)).unwrap();
    assert!((mid.sketch - 0.6).abs() < 1e-12);
    assert!((mid.edge - 0.4).abs() < 1e-12);
}

#[test]
fn ratio_is_monotone_bounded_and_complementary() {
    for lambda in [0.5, 1.0, 3.0] {
        let mut prev = 0.0;
        for i in 0..=1000 {
            let r = mix_ratio(&state(i, 1000, lambda)).unwrap();
            assert!(r.sketch >= prev);
            assert!((0.1..=0.9 + 1e-15).contains(&r.sketch));
            assert_eq!(r.sketch + r.edge, 1.0);
            prev = r.sketch;
        }
    }
}

#[test]
fn invalid_states_rejected() {
    assert!(ScheduleState::new(0, 0, 1.0).is_err());
    assert!(ScheduleState::new(5, 4, 1.0).is_err());
    assert!(ScheduleState::new(0, 4, 0.0).is_err());
    let raw = ScheduleState { i_cur: 0, i_max: 0, lambda: 1.0 };
    assert!(mix_ratio(&raw).is_err());
}

#[test]
fn empirical_sketch_fraction_matches_probability() {
    let p = mix_ratio(&state(500, 1000, 1.0)).unwrap().sketch;
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let flags = draw_batch_sources(p, 100_000, &mut rng);
    let frac = flags.iter().filter(|&&s| s == Source::Sketch).count() as f64 / 1e5;
    assert!((frac - 0.6).abs() < 0.01, "{frac}");
}

#[test]
fn batch_sources_have_batch_length_and_are_seeded() {
    let a = draw_batch_sources(0.4, 8, &mut ChaCha8Rng::seed_from_u64(3));
    let b = draw_batch_sources(0.4, 8, &mut ChaCha8Rng::seed_from_u64(3));
    assert_eq!(a.len(), 8);
    assert_eq!(a, b);
    assert!(draw_batch_sources(0.0, 64, &mut ChaCha8Rng::seed_from_u64(0)).iter().all(|&s| s == Source::Edge));
    assert!(draw_batch_sources(1.0, 64, &mut ChaCha8Rng::seed_from_u64(0)).iter().all(|&s| s == Source::Sketch));
}

#[test]
fn pretrain_finetune_switches_once() {
    let mode = ScheduleMode::PretrainFinetune { switch: 0.5 };
    assert_eq!(mode.sketch_probability(&state(0, 100, 1.0)).unwrap(), 0.0);
    assert_eq!(mode.sketch_probability(&state(49, 100, 1.0)).unwrap(), 0.0);
    assert_eq!(mode.sketch_probability(&state(50, 100, 1.0)).unwrap(), 1.0);
    assert_eq!(mode.sketch_probability(&state(100, 100, 1.0)).unwrap(), 1.0);
    let ramp = ScheduleMode::Ramp.sketch_probability(&state(25, 100, 1.0)).unwrap();
    assert!((ramp - 0.35).abs() < 1e-12);
    assert!(ScheduleMode::PretrainFinetune { switch: 1.5 }.sketch_probability(&state(0, 1, 1.0)).is_err());
}
