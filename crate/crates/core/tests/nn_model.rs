use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use tsrlab_core::arch::{
    conv_stem, final_geometry, linear_proj, param_count, preset, sequence_length, trace_geometry, ConvSpec,
    EncoderSpec, FullModelSpec, LayerSpec, PoolSpec, FULL_PRESETS, TOY_PRESETS,
};
use tsrlab_core::grammar::{Token, TokenSequence};
use tsrlab_core::nn::{
    grad_check, load_checkpoint, narrow, parameter_shapes, positive_params, probe_encoder, save_checkpoint,
    synth_dataset, theoretical_box, train_toy, write_loss_csv, Graph, ModelInstance, NnError, ProbeMethod,
    Tensor,
};

fn image(m: &ModelInstance, seed: u64) -> Tensor {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let shape = m.input_shape();
    let n = shape.iter().product();
    Tensor::new(shape.to_vec(), (0..n).map(|_| rng.gen::<f64>()).collect())
}

fn seq(tokens: &[Token]) -> TokenSequence {
    TokenSequence::unbounded(tokens.to_vec())
}

fn short_table() -> TokenSequence {
    use Token::*;
    seq(&[
        Sos, TbodyOpen, TrOpen, TdOpen, TdClose, TdOpen, TdClose, TrClose, TbodyClose, Eos,
    ])
}

/// Narrow transformer used where finite differences run over many coordinates.
fn small(encoder: EncoderSpec) -> FullModelSpec {
    FullModelSpec {
        n_encoder_layers: 1,
        n_decoder_layers: 1,
        d_model: 32,
        d_ff: 64,
        heads: 4,
        ..FullModelSpec::toy(encoder.with_input(16, 16), 32)
    }
}

#[test]
fn allocated_parameters_match_static_count_for_toy_presets() {
    for name in TOY_PRESETS {
        let spec = preset(name).unwrap();
        let m = ModelInstance::new(spec.clone(), 0).unwrap();
        assert_eq!(m.scalar_count() as u64, param_count(&spec).total, "{name}");
    }
}

#[test]
fn declared_shapes_match_static_count_for_full_size_presets() {
    for name in FULL_PRESETS {
        let spec = preset(name).unwrap();
        let n: u64 = parameter_shapes(&spec)
            .iter()
            .map(|(_, s)| s.iter().product::<usize>() as u64)
            .sum();
        assert_eq!(n, param_count(&spec).total, "{name}");
    }
}

#[test]
fn encoder_memory_has_predicted_sequence_length() {
    for name in TOY_PRESETS {
        let m = ModelInstance::new(preset(name).unwrap(), 1).unwrap();
        let mem = m.forward_encode(&image(&m, 2)).unwrap();
        let n = sequence_length(&m.spec().encoder).unwrap();
        assert_eq!(mem.shape(), &[n, 64], "{name}");
    }
}

#[test]
fn zero_head_gives_uniform_loss() {
    let mut m = ModelInstance::new(preset("toy-convstem").unwrap(), 4).unwrap();
    m.zero_head();
    let loss = m.loss(&image(&m, 5), &short_table()).unwrap();
    assert!((loss - 32f64.ln()).abs() < 1e-3, "{loss}");
}

#[test]
fn decoder_is_causal() {
    use Token::*;
    let m = ModelInstance::new(preset("toy-linearproj-8").unwrap(), 6).unwrap();
    let img = image(&m, 7);
    let a = m
        .logits(&img, &[Sos, TbodyOpen, TrOpen, TdOpen, TdClose])
        .unwrap();
    let b = m.logits(&img, &[Sos, TbodyOpen, TrOpen, TheadOpen, Eos]).unwrap();
    for i in 0..3 {
        assert_eq!(a.row(i), b.row(i), "position {i}");
    }
    assert_ne!(a.row(3), b.row(3));
}

#[test]
fn softmax_rows_sum_to_one() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut g = Graph::new();
    let x = g.constant(Tensor::new(
        vec![6, 6],
        (0..36).map(|_| rng.gen_range(-30.0..30.0)).collect(),
    ));
    for causal in [false, true] {
        let y = g.softmax(x, causal);
        let t = g.value(y);
        for i in 0..6 {
            let row = t.row(i);
            assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            if causal {
                assert!(row[i + 1..].iter().all(|&v| v == 0.0));
            }
        }
    }
}

#[test]
fn rejects_bad_targets_and_images() {
    let m = ModelInstance::new(preset("toy-linearproj-16").unwrap(), 0).unwrap();
    let img = image(&m, 0);
    assert!(matches!(
        m.loss(&img, &seq(&[Token::Sos])),
        Err(NnError::EmptySequence)
    ));
    assert!(matches!(
        m.loss(&img, &seq(&[Token::TrOpen, Token::Eos])),
        Err(NnError::MissingStart)
    ));
    let long = seq(&[Token::Sos; 65]);
    assert!(matches!(
        m.loss(&img, &long),
        Err(NnError::LengthExceeded { len: 65, max: 64 })
    ));
    let wrong = Tensor::zeros(&[3, 16, 16]);
    assert!(matches!(
        m.loss(&wrong, &short_table()),
        Err(NnError::ShapeMismatch { .. })
    ));
}

fn random_stack(rng: &mut ChaCha8Rng) -> EncoderSpec {
    loop {
        let depth = rng.gen_range(1..=4);
        let mut c = 1;
        let mut layers = Vec::new();
        for _ in 0..depth {
            let k = rng.gen_range(1..=5);
            let s = rng.gen_range(1..=2);
            let p = rng.gen_range(0..=k / 2);
            let d = if k > 1 { rng.gen_range(1..=2) } else { 1 };
            let out = rng.gen_range(1..=2);
            let relu = rng.gen_bool(0.5);
            layers.push(match rng.gen_range(0..6) {
                0 => LayerSpec::Patchify {
                    patch: rng.gen_range(1..=3),
                    in_channels: c,
                    out_channels: out,
                },
                1 => LayerSpec::MaxPool(PoolSpec {
                    kernel: k.max(2),
                    stride: s,
                    padding: p.min(k.max(2) / 2),
                }),
                _ => {
                    let mut conv = ConvSpec::new(k, s, p, c, out).dilated(d);
                    conv.relu = relu;
                    LayerSpec::Conv(conv)
                }
            });
            if !matches!(layers.last(), Some(LayerSpec::MaxPool(_))) {
                c = out;
            }
        }
        let spec = EncoderSpec::new("random", layers)
            .with_input(40, 40)
            .with_channels(1);
        if trace_geometry(&spec).is_ok() {
            return spec;
        }
    }
}

/// Output positions whose theoretical input span lies fully inside the image.
fn unclipped_positions(spec: &EncoderSpec) -> Vec<usize> {
    let g = final_geometry(spec).unwrap();
    let side = spec.input_size.0 as i64;
    (0..g.out_size.0)
        .filter(|&p| {
            let lo = g.start + (p * g.jump) as i64;
            lo >= 0 && lo + g.rf as i64 <= side
        })
        .collect()
}

#[test]
fn empirical_receptive_field_matches_recursion_on_random_stacks() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let mut checked = 0;
    let mut pooled = 0;
    while checked < 24 {
        let spec = random_stack(&mut rng);
        let inner = unclipped_positions(&spec);
        if inner.is_empty() {
            continue;
        }
        let params = positive_params(&spec, checked);
        for pos in [
            (inner[0], inner[inner.len() - 1]),
            (inner[inner.len() / 2], inner[0]),
        ] {
            let got = probe_encoder(&spec, &params, pos, ProbeMethod::Auto).unwrap();
            let want = theoretical_box(&spec, pos).unwrap();
            assert_eq!(got, want, "{pos:?} {spec:?}");
        }
        pooled += spec.layers.iter().any(|l| matches!(l, LayerSpec::MaxPool(_))) as usize;
        checked += 1;
    }
    assert!(pooled >= 3, "only {pooled} stacks exercised max pooling");
}

#[test]
fn bisect_and_gradient_probes_agree_without_pooling() {
    let spec = narrow(&conv_stem("s", 5, 2, 8, 16).with_input(32, 32));
    let params = positive_params(&spec, 1);
    for pos in [(3, 3), (4, 2)] {
        let a = probe_encoder(&spec, &params, pos, ProbeMethod::Gradient).unwrap();
        let b = probe_encoder(&spec, &params, pos, ProbeMethod::Bisect).unwrap();
        assert_eq!(a, b);
    }
}

#[test]
fn toy_presets_probe_matches_theory_including_corners() {
    for name in TOY_PRESETS {
        let spec = preset(name).unwrap().encoder;
        let g = final_geometry(&spec).unwrap();
        let last = (g.out_size.0 - 1, g.out_size.1 - 1);
        let params = positive_params(&narrow(&spec), 3);
        for pos in [(0, 0), last, (last.0 / 2, last.1 / 2)] {
            let got = probe_encoder(&narrow(&spec), &params, pos, ProbeMethod::Auto).unwrap();
            assert_eq!(got, theoretical_box(&spec, pos).unwrap(), "{name} {pos:?}");
        }
    }
}

#[test]
fn full_width_model_probe_matches_theory() {
    let m = ModelInstance::new(preset("toy-resnet").unwrap(), 11).unwrap();
    let got = m.empirical_rf((3, 4)).unwrap();
    assert_eq!(got, theoretical_box(&m.spec().encoder, (3, 4)).unwrap());
}

#[test]
fn gradients_match_finite_differences() {
    let specs = [
        small(linear_proj("lp", 4, 32)),
        small(conv_stem("cs", 3, 2, 8, 32)),
    ];
    for spec in specs {
        let name = spec.name().to_string();
        let m = ModelInstance::new(spec, 12).unwrap();
        let report = grad_check(&m, &image(&m, 13), &short_table(), 100, 14).unwrap();
        assert!(report
            .groups
            .iter()
            .all(|g| g.checked == m.params().get(&g.name).unwrap().len().min(100)));
        let worst = report
            .groups
            .iter()
            .max_by(|a, b| a.max_rel_error.total_cmp(&b.max_rel_error))
            .unwrap();
        assert!(
            report.max_rel_error < 1e-4,
            "{name}: {} at {}",
            worst.max_rel_error,
            worst.name
        );
    }
}

#[test]
fn overfits_eight_tables_and_decodes_them() {
    let mut rng = ChaCha8Rng::seed_from_u64(15);
    let data = synth_dataset(&mut rng, 8, 64);
    let mut m = ModelInstance::new(preset("toy-linearproj-8").unwrap(), 16).unwrap();
    let curve = train_toy(&mut m, &data, 500, 3e-3).unwrap();
    let first_good = curve.iter().position(|&l| l < 0.01);
    assert!(first_good.is_some(), "final loss {}", curve.last().unwrap());
    for (img, gt) in &data {
        assert_eq!(m.greedy_decode(img, 64).unwrap().tokens(), gt.tokens());
    }
}

#[test]
fn zero_learning_rate_keeps_loss_constant() {
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let data = synth_dataset(&mut rng, 3, 64);
    let mut m = ModelInstance::new(preset("toy-linearproj-16").unwrap(), 18).unwrap();
    let before = m.params().clone();
    let curve = train_toy(&mut m, &data, 5, 0.0).unwrap();
    assert!(curve.iter().all(|&l| l == curve[0]));
    assert_eq!(m.params(), &before);
}

#[test]
fn training_is_deterministic() {
    let run = || {
        let mut rng = ChaCha8Rng::seed_from_u64(19);
        let data = synth_dataset(&mut rng, 4, 64);
        let mut m = ModelInstance::new(preset("toy-convstem").unwrap(), 20).unwrap();
        m.config.dropout = 0.1;
        let curve = train_toy(&mut m, &data, 4, 1e-3).unwrap();
        (curve, m.params().clone())
    };
    let (a, pa) = run();
    let (b, pb) = run();
    assert_eq!(a, b);
    assert_eq!(pa, pb);
    let mut csv = Vec::new();
    write_loss_csv(&mut csv, &a).unwrap();
    let text = String::from_utf8(csv).unwrap();
    assert!(text.starts_with("step,loss\n0,"));
    assert_eq!(text.lines().count(), 5);
}

#[test]
fn checkpoint_round_trip() {
    let a = ModelInstance::new(preset("toy-resnet").unwrap(), 21).unwrap();
    let mut bytes = Vec::new();
    save_checkpoint(&a, &mut bytes).unwrap();
    assert_eq!(&bytes[..8], b"TSRLCKPT");
    let mut b = ModelInstance::new(preset("toy-resnet").unwrap(), 22).unwrap();
    load_checkpoint(&mut b, bytes.as_slice()).unwrap();
    for ((_, x), (_, y)) in a.params().iter().zip(b.params().iter()) {
        for (u, v) in x.data().iter().zip(y.data()) {
            assert_eq!(*u as f32, *v as f32);
        }
    }
    let mut other = ModelInstance::new(preset("toy-convstem").unwrap(), 0).unwrap();
    assert!(load_checkpoint(&mut other, bytes.as_slice()).is_err());
    assert!(load_checkpoint(&mut b, &bytes[..100]).is_err());
}

#[test]
fn deep_bottleneck_stack_probe_matches_theory() {
    // Edge pixels reach the centre through a single path; the probe must not
    // lose that contribution to rounding.
    let spec = preset("resnet50").unwrap().encoder;
    let thin = narrow(&spec);
    let params = positive_params(&thin, 5);
    for pos in [(14, 14), (0, 27)] {
        let got = probe_encoder(&thin, &params, pos, ProbeMethod::Auto).unwrap();
        assert_eq!(got, theoretical_box(&spec, pos).unwrap(), "{pos:?}");
    }
}
