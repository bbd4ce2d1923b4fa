use mrugan_augment::io::{read_field, read_gray, read_rgb, write_binary, write_field, write_rgb};
use mrugan_augment::{BinaryImage, DistanceField, RgbImage};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[test]
fn field_quantization_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("field.png");
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut data: Vec<f32> = (0..20 * 14).map(|_| rng.random()).collect();
    data[0] = 0.0;
    data[1] = 1.0;
    let field = DistanceField { width: 20, height: 14, data };
    write_field(&path, &field).unwrap();
    let back = read_field(&path).unwrap();
    assert_eq!((back.width, back.height), (20, 14));
    for (a, b) in field.data.iter().zip(&back.data) {
        assert!((a - b).abs() <= 1.0 / 65535.0, "{a} vs {b}");
    }
    assert_eq!(back.data[0], 0.0);
    assert_eq!(back.data[1], 1.0);
}

#[test]
fn rgb_round_trip_is_exact_on_8bit_values() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("photo.png");
    let img = RgbImage::new(
        3,
        2,
        (0..6).map(|i| [i as f32 * 40.0 / 255.0, 1.0, 0.0]).collect(),
    )
    .unwrap();
    write_rgb(&path, &img).unwrap();
    assert_eq!(read_rgb(&path).unwrap(), img);
}

#[test]
fn binary_reads_back_as_gray() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("edges.png");
    let b = BinaryImage::from_ascii(&["#..", ".#.", "..#"]);
    write_binary(&path, &b).unwrap();
    let g = read_gray(&path).unwrap();
    assert_eq!(g.data, vec![1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0]);
    // Gray files also load as RGB.
    assert_eq!(read_rgb(&path).unwrap().get(1, 1), [1.0; 3]);
}

#[test]
fn missing_file_names_the_path() {
    let err = read_rgb("/nonexistent/dir/x.png").unwrap_err();
    assert!(err.to_string().contains("/nonexistent/dir/x.png"));
}
