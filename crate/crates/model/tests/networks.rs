mod common;

use common::{checker, probe, rng};
use mrugan_core::{grad_check, Checkpoint, Tape, Tensor};
use mrugan_model::{
    make_pyramid, sample_noise, tensor_pyramid, Bound, Discriminator, DiscriminatorConfig, GateKind,
    Generator, GeneratorConfig, ParamStore,
};

fn tiny_g(gate: GateKind) -> GeneratorConfig {
    GeneratorConfig {
        resolution: 8,
        encoder: vec![3, 4],
        decoder: vec![4, 3],
        noise_dim: 2,
        classes: 2,
        gate,
        depth: 1,
        ..GeneratorConfig::default()
    }
}

fn tiny_d(gate: GateKind) -> DiscriminatorConfig {
    DiscriminatorConfig {
        resolution: 8,
        channels: vec![3, 4],
        classes: 3,
        gate,
        depth: 1,
        ..DiscriminatorConfig::default()
    }
}

fn field(n: usize, r: usize, seed: u64) -> Tensor<f32> {
    Tensor::uniform([n, 1, r, r], 0.0, 1.0, &mut rng(seed))
}

#[test]
fn pyramid_levels_and_shapes() {
    let tape = Tape::<f32>::new();
    let x = tape.constant(field(1, 32, 0));
    let one = make_pyramid(x, 1).unwrap();
    assert_eq!(one.len(), 1);
    assert_eq!(one[0].value().data(), x.value().data());
    let four = make_pyramid(x, 4).unwrap();
    let sides: Vec<usize> = four.iter().map(|v| v.shape().h()).collect();
    assert_eq!(sides, vec![32, 16, 8, 4]);
    for pair in four.windows(2) {
        let down = mrugan_core::kernels::avg_pool(&pair[0].value(), 2).unwrap();
        assert_eq!(down.data(), pair[1].value().data());
    }
    let flat = tensor_pyramid(&Tensor::<f32>::full([2, 1, 16, 16], 0.375), 3).unwrap();
    assert!(flat.iter().all(|l| l.data().iter().all(|&v| v == 0.375)));
    assert!(make_pyramid(tape.constant(field(1, 12, 0)), 4).is_err());
}

#[test]
fn default_generator_output_shape_and_range() {
    let mut store = ParamStore::<f32>::new();
    let g = Generator::new(GeneratorConfig::default(), &mut store, &mut rng(1)).unwrap();
    assert_eq!(g.param_count(), store.numel());
    let tape = Tape::new();
    let p = store.bind_frozen(&tape);
    let noise = tape.constant(sample_noise(2, 64, &mut rng(2)));
    let y = g.forward_field(&p, tape.constant(field(2, 32, 3)), noise, &[0, 3]).unwrap();
    assert_eq!(y.shape().0, [2, 3, 32, 32]);
    assert!(y.value().data().iter().all(|v| v.is_finite() && v.abs() <= 1.0));
}

#[test]
fn tanh_bound_holds_for_extreme_parameters() {
    let mut store = ParamStore::<f32>::new();
    let g = Generator::new(tiny_g(GateKind::LeakyNorm), &mut store, &mut rng(4)).unwrap();
    for v in store.values_mut() {
        *v = v.map(|a| a * 1000.0);
    }
    let tape = Tape::new();
    let p = store.bind_frozen(&tape);
    let noise = tape.constant(sample_noise(1, 2, &mut rng(5)));
    let y = g.forward_field(&p, tape.constant(field(1, 8, 6)), noise, &[1]).unwrap();
    assert!(y.value().data().iter().all(|v| (-1.0..=1.0).contains(v)));
}

#[test]
fn noise_changes_output() {
    let mut store = ParamStore::<f32>::new();
    let g = Generator::new(GeneratorConfig::default(), &mut store, &mut rng(7)).unwrap();
    let tape = Tape::new();
    let p = store.bind_frozen(&tape);
    let sketch = tape.constant(field(1, 32, 8));
    let a = g
        .forward_field(&p, sketch, tape.constant(sample_noise(1, 64, &mut rng(9))), &[2])
        .unwrap();
    let b = g
        .forward_field(&p, sketch, tape.constant(sample_noise(1, 64, &mut rng(10))), &[2])
        .unwrap();
    let l1 = a.sub(b).unwrap().abs().mean().item();
    assert!(l1 > 1e-4, "L1 between samples {l1}");
}

#[test]
fn label_changes_output() {
    let mut store = ParamStore::<f32>::new();
    let g = Generator::new(tiny_g(GateKind::Sigmoid), &mut store, &mut rng(7)).unwrap();
    // Conditional norm tables start at identity; make them class-specific.
    for (i, v) in store.values_mut().iter_mut().enumerate() {
        *v = v.map(|a| a + 0.01 * i as f32);
    }
    let mut r = rng(1);
    for id in store.ids().collect::<Vec<_>>() {
        if store.name(id).contains("norm_") {
            *store.get_mut(id) = Tensor::uniform(store.get(id).shape(), 0.5, 1.5, &mut r);
        }
    }
    let tape = Tape::new();
    let p = store.bind_frozen(&tape);
    let sketch = tape.constant(field(1, 8, 8));
    let noise = tape.constant(sample_noise(1, 2, &mut rng(9)));
    let a = g.forward_field(&p, sketch, noise, &[0]).unwrap();
    let b = g.forward_field(&p, sketch, noise, &[1]).unwrap();
    assert!(a.sub(b).unwrap().abs().mean().item() > 1e-5);
}

#[test]
fn generator_gradient_reaches_every_pyramid_level() {
    let cfg = GeneratorConfig {
        resolution: 16,
        encoder: vec![4, 6, 8],
        decoder: vec![6, 4, 4],
        noise_dim: 3,
        ..GeneratorConfig::default()
    };
    let mut store = ParamStore::<f64>::new();
    let g = Generator::new(cfg, &mut store, &mut rng(11)).unwrap();
    let levels = tensor_pyramid(&Tensor::<f64>::uniform([1, 1, 16, 16], 0.0, 1.0, &mut rng(12)), 3).unwrap();
    let noise = sample_noise::<f64>(1, 3, &mut rng(13));
    let run = |lv: &[Tensor<f64>]| {
        let tape = Tape::new();
        let p = store.bind_frozen(&tape);
        let vs: Vec<_> = lv.iter().map(|l| tape.constant(l.clone())).collect();
        g.forward(&p, &vs, tape.constant(noise.clone()), &[1]).unwrap().sum().item()
    };
    let tape = Tape::new();
    let p = store.bind_frozen(&tape);
    let vars: Vec<_> = levels.iter().map(|l| tape.param(l.clone())).collect();
    let y = g.forward(&p, &vars, tape.constant(noise.clone()), &[1]).unwrap();
    let grads = tape.gradients(y.sum(), &vars).unwrap();
    for (i, gr) in grads.iter().enumerate() {
        assert!(gr.max_abs() > 0.0, "level {i}");
        let j = gr.data().iter().enumerate().max_by(|a, b| a.1.abs().total_cmp(&b.1.abs())).unwrap().0;
        let (mut plus, mut minus) = (levels.clone(), levels.clone());
        plus[i].data_mut()[j] += 1e-5;
        minus[i].data_mut()[j] -= 1e-5;
        let fd = (run(&plus) - run(&minus)) / 2e-5;
        assert!(fd.abs() > 0.0, "level {i}: finite difference is zero");
        assert!((fd - gr.data()[j]).abs() <= 1e-4 * fd.abs().max(1e-6), "level {i}: {fd} vs {}", gr.data()[j]);
    }
}

#[test]
fn generator_rejects_bad_inputs() {
    let mut store = ParamStore::<f32>::new();
    let g = Generator::new(tiny_g(GateKind::Sigmoid), &mut store, &mut rng(0)).unwrap();
    let tape = Tape::new();
    let p = store.bind_frozen(&tape);
    let sketch = tape.constant(field(2, 8, 0));
    let noise = tape.constant(sample_noise(2, 2, &mut rng(0)));
    assert!(g.forward_field(&p, sketch, noise, &[0, 2]).is_err());
    assert!(g.forward_field(&p, sketch, noise, &[0]).is_err());
    let wrong = tape.constant(sample_noise(2, 3, &mut rng(0)));
    assert!(g.forward_field(&p, sketch, wrong, &[0, 1]).is_err());
    let pyr = make_pyramid(sketch, 1).unwrap();
    assert!(g.forward(&p, &pyr, noise, &[0, 1]).is_err());
}

#[test]
fn invalid_generator_configs_rejected() {
    let mut store = ParamStore::<f32>::new();
    let uneven = GeneratorConfig { decoder: vec![32, 32], ..GeneratorConfig::default() };
    assert!(Generator::new(uneven, &mut store, &mut rng(0)).is_err());
    let odd = GeneratorConfig { resolution: 20, ..GeneratorConfig::default() };
    assert!(Generator::new(odd, &mut store, &mut rng(0)).is_err());
}

#[test]
fn generator_without_skips_runs() {
    for skips in [true, false] {
        let cfg = GeneratorConfig { skips, ..tiny_g(GateKind::Sigmoid) };
        let mut store = ParamStore::<f32>::new();
        let g = Generator::new(cfg, &mut store, &mut rng(3)).unwrap();
        assert_eq!(g.param_count(), store.numel());
        let tape = Tape::new();
        let p = store.bind_frozen(&tape);
        let y = g
            .forward_field(&p, tape.constant(field(2, 8, 1)), tape.constant(sample_noise(2, 2, &mut rng(2))), &[0, 1])
            .unwrap();
        assert_eq!(y.shape().0, [2, 3, 8, 8]);
    }
    let with = GeneratorConfig { skips: true, ..tiny_g(GateKind::Sigmoid) }.block_configs();
    let without = GeneratorConfig { skips: false, ..tiny_g(GateKind::Sigmoid) }.block_configs();
    // Decoder block 0 takes the bottleneck plus the first encoder output.
    assert_eq!(with[2].in_channels, 4 + 2 + 3);
    assert_eq!(without[2].in_channels, 4 + 2);
}

#[test]
fn gradcheck_generator() {
    for gate in [GateKind::Sigmoid, GateKind::LeakyNorm] {
        for draw in 0..10u64 {
            let mut store = ParamStore::<f64>::new();
            let g = Generator::new(tiny_g(gate), &mut store, &mut rng(100 + draw)).unwrap();
            let mut r = rng(200 + draw);
            for id in store.ids().collect::<Vec<_>>() {
                if store.name(id).contains("norm_") {
                    *store.get_mut(id) = Tensor::uniform(store.get(id).shape(), 0.5, 1.5, &mut r);
                }
            }
            let mut inputs = vec![
                Tensor::<f64>::uniform([2, 1, 8, 8], 0.0, 1.0, &mut r),
                sample_noise(2, 2, &mut r),
            ];
            inputs.extend(store.values().iter().cloned());
            let report = grad_check(
                |v| {
                    let p = Bound::from_vars(v[2..].to_vec());
                    probe(g.forward_field(&p, v[0], v[1], &[1, 0])?, draw)
                },
                &inputs,
                &checker(draw, 4),
            )
            .unwrap();
            assert!(report.passed(), "{gate:?} draw {draw}: {} at {:?}", report.max_rel_err(), report.failures());
        }
    }
}

#[test]
fn gradcheck_discriminator() {
    for (gate, sketch) in [(GateKind::Sigmoid, false), (GateKind::LeakyNorm, false), (GateKind::Sigmoid, true)] {
        for draw in 0..10u64 {
            let cfg = DiscriminatorConfig { condition_on_sketch: sketch, ..tiny_d(gate) };
            let mut store = ParamStore::<f64>::new();
            let d = Discriminator::new(cfg, &mut store, &mut rng(300 + draw)).unwrap();
            let mut r = rng(400 + draw);
            let mut inputs = vec![
                Tensor::<f64>::uniform([2, 3, 8, 8], -1.0, 1.0, &mut r),
                Tensor::<f64>::uniform([2, 1, 8, 8], 0.0, 1.0, &mut r),
            ];
            inputs.extend(store.values().iter().cloned());
            let report = grad_check(
                |v| {
                    let p = Bound::from_vars(v[2..].to_vec());
                    let out = d.forward(&p, v[0], sketch.then_some(v[1]))?;
                    probe(out.gan, draw)?.add(probe(out.class, draw + 1)?)
                },
                &inputs,
                &checker(draw, 4),
            )
            .unwrap();
            assert!(report.passed(), "{gate:?} draw {draw}: {} at {:?}", report.max_rel_err(), report.failures());
        }
    }
}

#[test]
fn discriminator_shapes_determinism_and_gradient() {
    let mut store = ParamStore::<f32>::new();
    let d = Discriminator::new(DiscriminatorConfig::default(), &mut store, &mut rng(5)).unwrap();
    assert_eq!(d.param_count(), store.numel());
    let img = Tensor::<f32>::uniform([3, 3, 32, 32], -1.0, 1.0, &mut rng(6));
    let tape = Tape::new();
    let p = store.bind_frozen(&tape);
    let x = tape.param(img.clone());
    let a = d.forward(&p, x, None).unwrap();
    assert_eq!(a.gan.shape().0, [3, 1, 1, 1]);
    assert_eq!(a.class.shape().0, [3, 4, 1, 1]);
    let b = d.forward(&p, tape.constant(img), None).unwrap();
    assert_eq!(a.gan.value().data(), b.gan.value().data());
    assert_eq!(a.class.value().data(), b.class.value().data());
    let g = tape.gradients(a.gan.sum(), &[x]).unwrap().remove(0);
    assert!(g.data().iter().all(|v| v.is_finite()));
    assert!(g.max_abs() > 0.0);
}

#[test]
fn discriminator_rejects_bad_inputs() {
    let mut store = ParamStore::<f32>::new();
    let d = Discriminator::new(tiny_d(GateKind::Sigmoid), &mut store, &mut rng(5)).unwrap();
    let tape = Tape::new();
    let p = store.bind_frozen(&tape);
    assert!(d.forward(&p, tape.constant(Tensor::zeros([1, 1, 8, 8])), None).is_err());
    assert!(d.forward(&p, tape.constant(Tensor::zeros([1, 3, 16, 16])), None).is_err());
    let cfg = DiscriminatorConfig { condition_on_sketch: true, ..tiny_d(GateKind::Sigmoid) };
    let mut store = ParamStore::<f32>::new();
    let d = Discriminator::new(cfg, &mut store, &mut rng(5)).unwrap();
    let p = store.bind_frozen(&tape);
    let img = tape.constant(Tensor::zeros([1, 3, 8, 8]));
    assert!(d.forward(&p, img, None).is_err());
    assert!(d.forward(&p, img, Some(tape.constant(Tensor::zeros([1, 1, 8, 8])))).is_ok());
}

#[test]
fn networks_round_trip_through_checkpoint() {
    let dir = std::env::temp_dir().join(format!("mrugan-net-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let path = dir.join("nets.ckpt");

    let mut gs = ParamStore::<f32>::new();
    let g = Generator::new(tiny_g(GateKind::Sigmoid), &mut gs, &mut rng(1)).unwrap();
    let mut ds = ParamStore::<f32>::new();
    Discriminator::new(tiny_d(GateKind::Sigmoid), &mut ds, &mut rng(2)).unwrap();
    let mut ck = Checkpoint::new();
    gs.save_into(&mut ck, "generator");
    ds.save_into(&mut ck, "discriminator");
    ck.save(&path).unwrap();

    let back = Checkpoint::load(&path).unwrap();
    let mut gs2 = ParamStore::<f32>::new();
    Generator::new(tiny_g(GateKind::Sigmoid), &mut gs2, &mut rng(77)).unwrap();
    let mut ds2 = ParamStore::<f32>::new();
    Discriminator::new(tiny_d(GateKind::Sigmoid), &mut ds2, &mut rng(78)).unwrap();
    gs2.load_from(&back, "generator").unwrap();
    ds2.load_from(&back, "discriminator").unwrap();
    assert_eq!(gs2.values(), gs.values());
    assert_eq!(ds2.values(), ds.values());

    let tape = Tape::new();
    let sketch = tape.constant(field(1, 8, 3));
    let noise = tape.constant(sample_noise(1, 2, &mut rng(4)));
    let a = g.forward_field(&gs.bind_frozen(&tape), sketch, noise, &[0]).unwrap();
    let b = g.forward_field(&gs2.bind_frozen(&tape), sketch, noise, &[0]).unwrap();
    assert_eq!(a.value().data(), b.value().data());

    let mut wrong = ParamStore::<f32>::new();
    Generator::new(GeneratorConfig { skips: false, ..tiny_g(GateKind::Sigmoid) }, &mut wrong, &mut rng(0)).unwrap();
    assert!(wrong.load_from(&back, "generator").is_err());
    std::fs::remove_dir_all(dir).ok();
}
