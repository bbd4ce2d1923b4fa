use mrugan_augment::{
    augment_pipeline, binarize, component_sizes, detect_edges, distance_field, erode_threshold,
    remove_small_components, remove_spurs, thin, AugmentConfig, AugmentInput, BinaryImage,
    GrayImage, RgbImage,
};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_mask(rng: &mut impl Rng, w: usize, h: usize, density: f64) -> BinaryImage {
    BinaryImage::from_fn(w, h, |_, _| rng.random_bool(density))
}

/// Union of a few random discs and rectangles.
fn random_blob(rng: &mut impl Rng, size: usize) -> BinaryImage {
    let shapes: Vec<(f64, f64, f64, bool)> = (0..rng.random_range(1..4))
        .map(|_| {
            (
                rng.random_range(4.0..size as f64 - 4.0),
                rng.random_range(4.0..size as f64 - 4.0),
                rng.random_range(2.0..7.0),
                rng.random_bool(0.5),
            )
        })
        .collect();
    BinaryImage::from_fn(size, size, |x, y| {
        shapes.iter().any(|&(cx, cy, r, disc)| {
            let (dx, dy) = (x as f64 - cx, y as f64 - cy);
            if disc {
                dx * dx + dy * dy <= r * r
            } else {
                dx.abs() <= r && dy.abs() <= r * 0.6
            }
        })
    })
}

fn brute_force_field(b: &BinaryImage, cap: f64) -> Vec<f64> {
    let edges: Vec<(usize, usize)> = b.edge_pixels().collect();
    let mut out = Vec::with_capacity(b.width * b.height);
    for y in 0..b.height {
        for x in 0..b.width {
            let d = edges
                .iter()
                .map(|&(ex, ey)| ((x as f64 - ex as f64).powi(2) + (y as f64 - ey as f64).powi(2)).sqrt())
                .fold(f64::INFINITY, f64::min);
            out.push(d.min(cap) / cap);
        }
    }
    out
}

/// Union-find labelling, independent of the BFS used by the crate.
fn union_find_sizes(b: &BinaryImage) -> Vec<usize> {
    let n = b.width * b.height;
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(p: &mut [usize], mut i: usize) -> usize {
        while p[i] != i {
            p[i] = p[p[i]];
            i = p[i];
        }
        i
    }
    for y in 0..b.height {
        for x in 0..b.width {
            if !b.get(x, y) {
                continue;
            }
            for (dx, dy) in [(1isize, 0isize), (-1, 1), (0, 1), (1, 1)] {
                let (nx, ny) = (x as isize + dx, y as isize + dy);
                if b.get_signed(nx, ny) {
                    let a = find(&mut parent, y * b.width + x);
                    let c = find(&mut parent, ny as usize * b.width + nx as usize);
                    parent[a] = c;
                }
            }
        }
    }
    let mut counts = vec![0; n];
    for i in 0..n {
        if b.data[i] {
            let r = find(&mut parent, i);
            counts[r] += 1;
        }
    }
    (0..n).map(|i| if b.data[i] { counts[find(&mut parent, i)] } else { 0 }).collect()
}

#[test]
fn detect_edges_constant_image_is_zero() {
    let photo = RgbImage::filled(16, 12, [0.3, 0.6, 0.1]);
    let e = detect_edges(&photo).unwrap();
    assert!(e.data.iter().all(|&v| v == 0.0));
}

#[test]
fn detect_edges_rejects_empty_image() {
    let photo = RgbImage::new(0, 5, vec![]).unwrap();
    assert!(detect_edges(&photo).is_err());
}

#[test]
fn detect_edges_step_response_sits_on_the_step() {
    for k in [5usize, 10, 17] {
        let photo = RgbImage::new(
            24,
            16,
            (0..24 * 16)
                .map(|i| if i % 24 < k { [0.1; 3] } else { [0.9; 3] })
                .collect(),
        )
        .unwrap();
        let e = detect_edges(&photo).unwrap();
        for y in 0..16 {
            let row: Vec<f32> = (0..24).map(|x| e.get(x, y)).collect();
            let peak = row.iter().cloned().fold(0.0, f32::max);
            assert_eq!(peak, 1.0);
            for (x, &v) in row.iter().enumerate() {
                if v == peak {
                    assert!((x as isize - k as isize).abs() <= 2, "k={k} peak at {x}");
                }
                if (x as isize - k as isize).abs() > 4 {
                    assert!(v < 1e-3, "k={k}: response {v} far from the step at {x}");
                }
            }
        }
    }
}

#[test]
fn detect_edges_range_on_random_input() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let data = (0..20 * 20).map(|_| [rng.random(), rng.random(), rng.random()]).collect();
    let e = detect_edges(&RgbImage::new(20, 20, data).unwrap()).unwrap();
    assert!(e.data.iter().all(|v| (0.0..=1.0).contains(v)));
    assert!(e.data.iter().any(|&v| v == 1.0));
}

#[test]
fn binarize_examples() {
    let g = GrayImage::new(4, 4, vec![0.9; 16]).unwrap();
    assert_eq!(binarize(&g, 0.5).count(), 16);
    let g = GrayImage::new(3, 1, vec![0.49, 0.50, 0.51]).unwrap();
    assert_eq!(binarize(&g, 0.5).data, vec![false, true, true]);
}

#[test]
fn binarize_is_monotone_in_threshold() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..20 {
        let g = GrayImage::new(16, 16, (0..256).map(|_| rng.random()).collect()).unwrap();
        let mut prev = binarize(&g, 0.01);
        for t in 1..50 {
            let next = binarize(&g, 0.01 + t as f32 * 0.02);
            assert!(next.is_subset_of(&prev));
            prev = next;
        }
    }
}

#[test]
fn gray_image_rejects_out_of_range() {
    assert!(GrayImage::new(1, 1, vec![1.5]).is_err());
    assert!(GrayImage::new(2, 1, vec![0.5]).is_err());
}

#[test]
fn thin_keeps_single_pixel_lines() {
    let line = BinaryImage::from_ascii(&[".......", ".#####.", "......."]);
    assert_eq!(thin(&line), line);
    let diag = BinaryImage::from_ascii(&["#....", ".#...", "..#..", "...#.", "....#"]);
    assert_eq!(thin(&diag), diag);
}

#[test]
fn thin_square_to_small_skeleton() {
    let sq = BinaryImage::from_fn(9, 9, |x, y| (2..7).contains(&x) && (2..7).contains(&y));
    let t = thin(&sq);
    assert!(t.count() >= 1 && t.count() <= 5, "skeleton has {} pixels", t.count());
    assert!(t.is_subset_of(&sq));
}

#[test]
fn thin_is_idempotent_anti_extensive_and_keeps_connectivity() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for i in 0..50 {
        let blob = random_blob(&mut rng, 32);
        let t = thin(&blob);
        assert!(t.is_subset_of(&blob), "blob {i}");
        assert_eq!(thin(&t), t, "blob {i} not at a fixed point");
        let before = component_sizes(&blob).len();
        let after = component_sizes(&t).len();
        assert!(after <= before, "blob {i}: {before} -> {after} components");
    }
}

#[test]
fn small_component_examples() {
    let mut b = BinaryImage::empty(5, 5);
    b.set(2, 2, true);
    assert_eq!(remove_small_components(&b, 2).count(), 0);

    let ten = BinaryImage::from_fn(12, 3, |x, y| y == 1 && (1..11).contains(&x));
    assert_eq!(remove_small_components(&ten, 10), ten);
    assert_eq!(remove_small_components(&ten, 11).count(), 0);
}

#[test]
fn small_components_match_union_find_census() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..40 {
        let density = rng.random_range(0.05..0.45);
        let b = random_mask(&mut rng, 32, 32, density);
        let sizes = union_find_sizes(&b);
        let mut census: Vec<usize> = sizes.clone();
        census.retain(|&s| s > 0);
        for min_size in [1, 2, 3, 5, 10, 40] {
            let kept = remove_small_components(&b, min_size);
            for i in 0..b.data.len() {
                assert_eq!(kept.data[i], sizes[i] >= min_size);
            }
        }
        // Each component of size s contributes s pixels with size s.
        let mut expected: Vec<usize> = Vec::new();
        let mut remaining = census.clone();
        remaining.sort_unstable();
        while let Some(&s) = remaining.first() {
            expected.push(s);
            remaining.drain(..s);
        }
        assert_eq!(component_sizes(&b), expected);
    }
}

#[test]
fn erode_examples() {
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    let b = random_mask(&mut rng, 16, 16, 0.4);
    assert_eq!(erode_threshold(&b, 0), b);

    let block = BinaryImage::from_fn(5, 5, |x, y| (1..4).contains(&x) && (1..4).contains(&y));
    assert!(erode_threshold(&block, 8).get(2, 2));
    assert_eq!(erode_threshold(&block, 8).count(), 1);
    let k4 = erode_threshold(&block, 4);
    for (x, y) in [(1, 1), (3, 1), (1, 3), (3, 3)] {
        assert!(!k4.get(x, y));
    }
    for k in 0..=8 {
        assert!(erode_threshold(&b, k).is_subset_of(&b));
    }
}

#[test]
fn spurs_ring_is_untouched() {
    let ring = BinaryImage::from_ascii(&["......", ".####.", ".#..#.", ".#..#.", ".####.", "......"]);
    assert_eq!(remove_spurs(&ring, 4), ring);
}

#[test]
fn spurs_short_segment_vanishes() {
    let seg = BinaryImage::from_ascii(&[".......", ".#####.", "......."]);
    assert_eq!(remove_spurs(&seg, 5).count(), 0);
}

#[test]
fn spurs_stub_removed_bar_kept() {
    let t = BinaryImage::from_ascii(&[
        ".........",
        ".#######.",
        "....#....",
        "....#....",
        ".........",
    ]);
    let bar = BinaryImage::from_ascii(&[
        ".........",
        ".#######.",
        ".........",
        ".........",
        ".........",
    ]);
    assert_eq!(remove_spurs(&t, 2), bar);
}

#[test]
fn spurs_result_is_subset() {
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    for _ in 0..20 {
        let b = thin(&random_blob(&mut rng, 32));
        for len in 1..6 {
            assert!(remove_spurs(&b, len).is_subset_of(&b));
        }
    }
}

#[test]
fn distance_field_empty_is_ones() {
    let f = distance_field(&BinaryImage::empty(7, 5), 4.0).unwrap();
    assert!(f.data.iter().all(|&v| v == 1.0));
}

#[test]
fn distance_field_center_pixel() {
    let mut b = BinaryImage::empty(3, 3);
    b.set(1, 1, true);
    let cap = 2.0f32;
    let f = distance_field(&b, cap).unwrap();
    assert_eq!(f.get(1, 1), 0.0);
    for (x, y) in [(0, 1), (2, 1), (1, 0), (1, 2)] {
        assert_eq!(f.get(x, y), 1.0 / cap);
    }
    for (x, y) in [(0, 0), (2, 0), (0, 2), (2, 2)] {
        assert!((f.get(x, y) - 2f32.sqrt() / cap).abs() < 1e-7);
    }
}

#[test]
fn distance_field_rejects_bad_cap() {
    assert!(distance_field(&BinaryImage::empty(2, 2), 0.0).is_err());
}

#[test]
fn distance_field_matches_all_pairs_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(19);
    for i in 0..100 {
        let density = [0.0, 0.002, 0.01, 0.05, 0.3][i % 5];
        let b = random_mask(&mut rng, 32, 32, density);
        let cap = [32.0, 8.0, 5.5, 45.3][i % 4];
        let f = distance_field(&b, cap as f32).unwrap();
        let want = brute_force_field(&b, cap);
        for (got, want) in f.data.iter().zip(&want) {
            assert!((*got as f64 - want).abs() < 1e-6, "mask {i}: {got} vs {want}");
        }
    }
}

#[test]
fn distance_field_non_square() {
    let mut rng = ChaCha8Rng::seed_from_u64(23);
    let b = random_mask(&mut rng, 13, 29, 0.02);
    let f = distance_field(&b, 40.0).unwrap();
    for (got, want) in f.data.iter().zip(brute_force_field(&b, 40.0)) {
        assert!((*got as f64 - want).abs() < 1e-6);
    }
}

#[test]
fn pipeline_constant_photo_gives_ones() {
    let photo = RgbImage::filled(32, 32, [0.5, 0.2, 0.7]);
    let f = augment_pipeline(AugmentInput::Photo(&photo), &AugmentConfig::default()).unwrap();
    assert!(f.data.iter().all(|&v| v == 1.0));
}

fn disc_photo(size: usize, r: f32) -> RgbImage {
    let c = size as f32 / 2.0;
    RgbImage::new(
        size,
        size,
        (0..size * size)
            .map(|i| {
                let (x, y) = ((i % size) as f32 + 0.5 - c, (i / size) as f32 + 0.5 - c);
                if x * x + y * y <= r * r { [0.9, 0.2, 0.1] } else { [0.1, 0.3, 0.8] }
            })
            .collect(),
    )
    .unwrap()
}

#[test]
fn pipeline_composition_with_precomputed_edges() {
    let photo = disc_photo(48, 14.0);
    let cfg = AugmentConfig::for_resolution(48);
    let edges = detect_edges(&photo).unwrap();
    let a = augment_pipeline(AugmentInput::Photo(&photo), &cfg).unwrap();
    let b = augment_pipeline(AugmentInput::Edges(&edges), &cfg).unwrap();
    assert_eq!(a, b);
    assert!(a.data.iter().any(|&v| v == 0.0));
}

#[test]
fn pipeline_zero_set_follows_drawn_contour() {
    // A one-pixel ring drawn as an edge-probability map.
    let size = 64;
    let (c, r) = (31.5f64, 20.0f64);
    let contour = BinaryImage::from_fn(size, size, |x, y| {
        let d = ((x as f64 - c).powi(2) + (y as f64 - c).powi(2)).sqrt();
        (d - r).abs() < 0.5
    });
    let drawing = GrayImage::new(
        size,
        size,
        contour.data.iter().map(|&e| if e { 1.0 } else { 0.0 }).collect(),
    )
    .unwrap();
    let f = augment_pipeline(AugmentInput::Edges(&drawing), &AugmentConfig::default()).unwrap();
    let zero = f.zero_set();
    assert!(zero.count() > contour.count() / 2);
    let to_contour = distance_field(&contour, 1000.0).unwrap();
    for (x, y) in zero.edge_pixels() {
        assert!(to_contour.get(x, y) * 1000.0 <= 1.0 + 1e-4, "({x},{y}) off the contour");
    }
}

#[test]
fn config_scales_with_resolution() {
    let c = AugmentConfig::for_resolution(32);
    assert_eq!(c.cap, 16.0);
    assert_eq!(c.spur_len, 2);
    assert_eq!(c.min_component, 5);
    assert_eq!(AugmentConfig::for_resolution(64), AugmentConfig::default());
    let bad = AugmentConfig { threshold: 1.0, ..AugmentConfig::default() };
    assert!(bad.validate().is_err());
}

proptest! {
    #[test]
    fn distance_field_zero_exactly_on_edges(bits in proptest::collection::vec(prop::bool::weighted(0.1), 12 * 9), cap in 0.5f32..20.0) {
        let b = BinaryImage { width: 12, height: 9, data: bits };
        let f = distance_field(&b, cap).unwrap();
        prop_assert_eq!(f.zero_set(), b.clone());
        prop_assert!(f.data.iter().all(|v| (0.0..=1.0).contains(v)));
    }

    #[test]
    fn stages_are_anti_extensive(bits in proptest::collection::vec(prop::bool::weighted(0.3), 16 * 16), k in 0usize..=8, len in 1usize..6, min in 1usize..12) {
        let b = BinaryImage { width: 16, height: 16, data: bits };
        prop_assert!(thin(&b).is_subset_of(&b));
        prop_assert!(remove_small_components(&b, min).is_subset_of(&b));
        prop_assert!(erode_threshold(&b, k).is_subset_of(&b));
        prop_assert!(remove_spurs(&b, len).is_subset_of(&b));
    }
}

#[test]
fn spurs_long_branches_survive() {
    let t = BinaryImage::from_ascii(&[
        ".................",
        ".###############.",
        "........#........",
        "........#........",
        "........#........",
        "........#........",
        "........#........",
        ".................",
    ]);
    assert_eq!(remove_spurs(&t, 2), t);
    let pruned = remove_spurs(&t, 5);
    assert_eq!(pruned.count(), 15);
    assert!((1..16).all(|x| pruned.get(x, 1)));
}
