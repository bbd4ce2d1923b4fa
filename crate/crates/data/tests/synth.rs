use mrugan_augment::distance_field;
use mrugan_data::{corpus_sample, random_spec, render_sample, ShapeClass, ShapeSpec};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn ellipse() -> ShapeSpec {
    ShapeSpec {
        class: ShapeClass::Ellipse,
        center: [16.3, 15.8],
        scale: 11.0,
        aspect: 0.6,
        rotation: 0.4,
        fill: [0.9, 0.2, 0.1],
        background: [0.1, 0.1, 0.15],
        jitter: 0.06,
    }
}

#[test]
fn zero_jitter_sketch_equals_edge() {
    for class in ShapeClass::ALL {
        let spec = ShapeSpec { jitter: 0.0, ..random_spec(class, 32, &mut rng(1)) };
        let s = render_sample(&spec, 32, &mut rng(2)).unwrap();
        assert_eq!(s.sketch, s.edge);
    }
}

#[test]
fn jittered_sketch_differs_from_edge() {
    for class in ShapeClass::ALL {
        for i in 0..10 {
            let s = corpus_sample(5, class.index(), i, 32).unwrap();
            let diff: f32 =
                s.sketch.data.iter().zip(&s.edge.data).map(|(a, b)| (a - b).abs()).sum::<f32>() / s.edge.data.len() as f32;
            assert!(diff > 0.0, "{class:?} sample {i}");
        }
    }
}

#[test]
fn photo_boundary_lies_on_edge_zero_set() {
    for seed in 0..10 {
        let spec = ShapeSpec { rotation: seed as f64 * 0.3, ..ellipse() };
        let s = render_sample(&spec, 32, &mut rng(seed)).unwrap();
        let zero = s.edge.zero_set();
        // Pixels whose colour is neither pure fill nor pure background.
        let fill = s.photo.data.iter().map(|p| p[0]).fold(f32::MIN, f32::max);
        let bg = s.photo.data.iter().map(|p| p[0]).fold(f32::MAX, f32::min);
        let mut boundary = 0;
        for y in 0..32 {
            for x in 0..32 {
                let v = s.photo.get(x, y)[0];
                if v == fill || v == bg {
                    continue;
                }
                boundary += 1;
                let near = (-1..=1).any(|dy| (-1..=1).any(|dx| zero.get_signed(x as isize + dx, y as isize + dy)));
                assert!(near, "boundary pixel ({x},{y}) far from the contour");
            }
        }
        assert!(boundary > 20);
    }
}

#[test]
fn edge_field_is_distance_to_contour() {
    let s = render_sample(&ellipse(), 32, &mut rng(0)).unwrap();
    let cap = mrugan_augment::AugmentConfig::for_resolution(32).cap;
    let exact = distance_field(&s.edge_mask, cap).unwrap();
    for (a, b) in exact.data.iter().zip(&s.edge.data) {
        assert!((a - b).abs() <= 0.5 / 65535.0 + 1e-7);
    }
    assert_eq!(s.edge.zero_set(), s.edge_mask);
}

#[test]
fn rendering_is_deterministic() {
    let a = corpus_sample(9, 3, 7, 32).unwrap();
    let b = corpus_sample(9, 3, 7, 32).unwrap();
    assert_eq!(a, b);
    assert_ne!(a, corpus_sample(10, 3, 7, 32).unwrap());
}

#[test]
fn invalid_specs_rejected() {
    let bad = [
        ShapeSpec { jitter: 0.2, ..ellipse() },
        ShapeSpec { scale: 16.0, ..ellipse() },
        ShapeSpec { center: [1.0, 16.0], ..ellipse() },
        ShapeSpec { aspect: 0.0, ..ellipse() },
        ShapeSpec { fill: [1.5, 0.0, 0.0], ..ellipse() },
    ];
    for spec in bad {
        assert!(render_sample(&spec, 32, &mut rng(0)).is_err(), "{spec:?}");
    }
}

#[test]
fn random_specs_are_valid_at_supported_resolutions() {
    let mut r = rng(4);
    for res in [16, 32, 64] {
        for class in ShapeClass::ALL {
            for _ in 0..50 {
                random_spec(class, res, &mut r).validate(res).unwrap();
            }
        }
    }
}

#[test]
fn photo_values_are_eight_bit_levels() {
    let s = corpus_sample(1, 0, 0, 32).unwrap();
    for p in &s.photo.data {
        for &v in p {
            assert_eq!((v * 255.0).round() / 255.0, v);
        }
    }
}
