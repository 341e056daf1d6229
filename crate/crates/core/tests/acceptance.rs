//! Acceptance suite: one PASS/FAIL line per criterion, each under its time budget.

mod support;

use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use tsrlab_core::arch::{
    final_geometry, mac_count, param_count, preset, rf_ratio, sequence_length, ConvSpec, EncoderSpec,
    FullModelSpec, LayerSpec, Stage, FULL_PRESETS, TOY_PRESETS,
};
use tsrlab_core::grammar::{detokenize, parse, tokenize_str, tokenize_with_bound, vocabulary, TokenSequence};
use tsrlab_core::nn::{
    grad_check, narrow, parameter_shapes, positive_params, probe_encoder, synth_dataset, theoretical_box,
    train_toy, BBox, ModelInstance, ProbeMethod,
};
use tsrlab_core::teds::{teds, tree_edit_distance, StructureCost};

type Outcome = Result<String, String>;
/// Id, title, time budget and check.
type Criterion = (&'static str, &'static str, Duration, fn() -> Outcome);

fn ensure(ok: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg())
    }
}

fn named(name: &str) -> FullModelSpec {
    preset(name).expect("known preset")
}

const RESNETS: [&str; 3] = ["resnet18", "resnet34", "resnet50"];
const LINEAR: [&str; 5] = [
    "linearproj-14",
    "linearproj-16",
    "linearproj-28",
    "linearproj-56",
    "linearproj-112",
];

fn ac1() -> Outcome {
    let rf: Vec<usize> = RESNETS
        .iter()
        .map(|n| final_geometry(&named(n).encoder).unwrap().rf)
        .collect();
    ensure(rf == [435, 899, 427], || format!("got {rf:?}"))?;
    Ok(format!("ResNet-18/34/50 RF = {rf:?}"))
}

fn ac2() -> Outcome {
    let ratios: Vec<String> = RESNETS
        .iter()
        .chain(&LINEAR)
        .map(|n| rf_ratio(&named(n).encoder).unwrap().to_string())
        .collect();
    let want = [
        "97.10", "100.00", "95.31", "3.13", "3.57", "6.25", "12.50", "25.00",
    ];
    ensure(ratios == want, || format!("got {ratios:?}"))?;
    Ok(format!("RF ratios {}", ratios.join(" ")))
}

fn ac3() -> Outcome {
    let n: Vec<usize> = RESNETS
        .iter()
        .chain(&LINEAR)
        .map(|p| sequence_length(&named(p).encoder).unwrap())
        .collect();
    ensure(n == [784, 784, 784, 1024, 784, 256, 64, 16], || {
        format!("got {n:?}")
    })?;
    Ok(format!("N = {n:?}"))
}

fn ac4() -> Outcome {
    let mut parts = Vec::new();
    for (name, table) in [
        ("resnet18", 28.70e6),
        ("linearproj-28", 22.67e6),
        ("convstem", 24.08e6),
    ] {
        let p = param_count(&named(name)).total as f64;
        let dev = (p - table) / table;
        ensure(dev.abs() <= 0.05, || {
            format!("{name}: {p} vs {table} ({:+.2}%)", 100.0 * dev)
        })?;
        parts.push(format!("{name} {:.2}M ({:+.1}%)", p / 1e6, 100.0 * dev));
    }
    // 28x28 patches of 3 channels projected to 512, plus bias.
    let closed = 28 * 28 * 3 * 512 + 512;
    let patch = param_count(&named("linearproj-28")).stage(Stage::VisualEncoder);
    ensure(patch == closed, || format!("patchify stage {patch} != {closed}"))?;
    parts.push(format!("patchify {patch}"));
    Ok(parts.join(", "))
}

fn ac5() -> Outcome {
    let macs: Vec<u64> = LINEAR
        .iter()
        .map(|n| mac_count(&named(n)).unwrap().total)
        .collect();
    ensure(macs.windows(2).all(|w| w[0] > w[1]), || {
        format!("not decreasing: {macs:?}")
    })?;
    let r18 = mac_count(&named("resnet18")).unwrap().total as f64;
    let dev = (r18 - 42.22e9) / 42.22e9;
    ensure(dev.abs() <= 0.20, || {
        format!("ResNet-18 {r18} ({:+.1}%)", 100.0 * dev)
    })?;
    // 3x3 conv, 3 -> 8 channels, 4x4 output: 9 * 3 * 8 * 16.
    let enc = EncoderSpec::new("hand", vec![LayerSpec::Conv(ConvSpec::new(3, 1, 1, 3, 8))]).with_input(4, 4);
    let spec = FullModelSpec {
        n_encoder_layers: 0,
        n_decoder_layers: 0,
        d_model: 8,
        heads: 1,
        ..FullModelSpec::toy(enc, 1)
    };
    let hand = mac_count(&spec).unwrap().stage(Stage::VisualEncoder);
    ensure(hand == 3_456, || format!("hand conv {hand}"))?;
    Ok(format!(
        "LinearProj {:.2}G -> {:.2}G decreasing, ResNet-18 {:.2}G ({:+.1}%), hand conv {hand}",
        macs[0] as f64 / 1e9,
        macs[4] as f64 / 1e9,
        r18 / 1e9,
        100.0 * dev
    ))
}

fn ac6() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(606);
    let pairs = 1000;
    for i in 0..pairs {
        let (na, nb) = (rng.gen_range(1..=6), rng.gen_range(1..=6));
        let a = support::random_tree(&mut rng, na);
        let b = support::random_tree(&mut rng, nb);
        let fast = tree_edit_distance(&a, &b, &StructureCost);
        let slow = support::brute_force_distance(&a, &b);
        ensure(fast == slow, || format!("pair {i}: {fast} vs exhaustive {slow}"))?;
    }
    for i in 0..1000 {
        let seq = TokenSequence::unbounded(support::random_table(&mut rng).to_tokens());
        let s = teds(&seq, &seq).map_err(|e| e.to_string())?;
        ensure(s == 1.0, || format!("sequence {i}: teds(x, x) = {s}"))?;
    }
    Ok(format!(
        "{pairs} pairs match exhaustive search, teds(x, x) = 1 on 1000 sequences"
    ))
}

fn ac7() -> Outcome {
    ensure(vocabulary().len() == 32, || {
        format!("vocabulary has {}", vocabulary().len())
    })?;
    let mut rng = ChaCha8Rng::seed_from_u64(707);
    for i in 0..10_000 {
        let tree = support::random_table(&mut rng);
        let surfaces: Vec<&str> = tree.to_tokens().iter().map(|t| t.surface()).collect();
        let seq = tokenize_with_bound(&surfaces, usize::MAX).map_err(|e| e.to_string())?;
        let back = detokenize(&seq).map_err(|e| e.to_string())?;
        let again = tokenize_str(&back, usize::MAX).map_err(|e| e.to_string())?;
        ensure(back == surfaces.concat() && again == seq, || {
            format!("round trip {i} failed")
        })?;
    }
    let (mut unbalanced, mut rejected) = (0, 0);
    while unbalanced < 5_000 {
        let tokens = support::random_table(&mut rng).to_tokens();
        let mutated = support::mutate(&mut rng, &tokens);
        if !support::is_balanced(&mutated) {
            unbalanced += 1;
            rejected += parse(&mutated).is_err() as usize;
        }
    }
    ensure(rejected == unbalanced, || {
        format!("parse accepted {} of {unbalanced}", unbalanced - rejected)
    })?;
    Ok(format!(
        "|V| = 32, 10000 round trips, {rejected}/{unbalanced} unbalanced mutants rejected"
    ))
}

fn ac8() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(808);
    let (mut stacks, mut interior, mut border) = (0, 0, 0);
    while stacks < 12 {
        let spec = support::rf::random_stack(&mut rng, 5, 40);
        let g = final_geometry(&spec).unwrap();
        let n = g.out_size.0;
        let inside = |p: usize| {
            let lo = g.start + (p * g.jump) as i64;
            lo >= 0 && lo + g.rf as i64 <= 40
        };
        if !(0..n).any(inside) {
            continue;
        }
        let params = positive_params(&spec, stacks);
        for p in 0..n {
            let pos = (p, n - 1 - p);
            let got = probe_encoder(&spec, &params, pos, ProbeMethod::Auto).map_err(|e| e.to_string())?;
            let reach = BBox {
                rows: support::rf::reachable_span(&spec.layers, 40, pos.0),
                cols: support::rf::reachable_span(&spec.layers, 40, pos.1),
            };
            ensure(got == reach, || {
                format!("{pos:?}: probe {got} vs reachable {reach} in {:?}", spec.layers)
            })?;
            if inside(pos.0) && inside(pos.1) {
                let want = theoretical_box(&spec, pos).map_err(|e| e.to_string())?;
                ensure(got == want, || {
                    format!("{pos:?}: probe {got} vs recursion {want} in {:?}", spec.layers)
                })?;
                interior += 1;
            } else {
                border += 1;
            }
        }
        stacks += 1;
    }
    let mut presets = 0;
    for name in TOY_PRESETS.iter().filter(|n| !n.ends_with("resnet")) {
        let spec = named(name).encoder;
        let thin = narrow(&spec);
        let params = positive_params(&thin, 1);
        let (oh, ow) = final_geometry(&spec).unwrap().out_size;
        for r in 0..oh {
            for c in 0..ow {
                let got =
                    probe_encoder(&thin, &params, (r, c), ProbeMethod::Auto).map_err(|e| e.to_string())?;
                let want = theoretical_box(&spec, (r, c)).map_err(|e| e.to_string())?;
                ensure(got == want, || {
                    format!("{name} ({r}, {c}): probe {got} vs recursion {want}")
                })?;
                presets += 1;
            }
        }
    }
    Ok(format!(
        "{stacks} random stacks ({interior} unclipped positions equal the recursion, {border} border positions \
         equal the per-layer clipped oracle), {presets} toy ConvStem/LinearProj positions equal the clipped recursion"
    ))
}

fn ac9() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(909);
    let (image, target) = synth_dataset(&mut rng, 1, 64).remove(0);
    let mut parts = Vec::new();
    for name in ["toy-linearproj-8", "toy-convstem"] {
        let m = ModelInstance::new(named(name), 9).map_err(|e| e.to_string())?;
        let r = grad_check(&m, &image, &target, 100, 10).map_err(|e| e.to_string())?;
        let coords: usize = r.groups.iter().map(|g| g.checked).sum();
        ensure(r.max_rel_error < 1e-4, || {
            format!("{name}: max relative error {:.3e}", r.max_rel_error)
        })?;
        parts.push(format!(
            "{name} {:.2e} over {coords} coordinates",
            r.max_rel_error
        ));
    }
    Ok(parts.join(", "))
}

fn ac10() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(1010);
    let data = synth_dataset(&mut rng, 8, 64);
    let mut uniform = ModelInstance::new(named("toy-convstem"), 3).map_err(|e| e.to_string())?;
    uniform.zero_head();
    let ln32 = 32f64.ln();
    for (img, gt) in &data {
        let logits = uniform.logits(img, gt.tokens()).map_err(|e| e.to_string())?;
        for (step, next) in gt.tokens()[1..].iter().enumerate() {
            let row = logits.row(step);
            let lse = row.iter().map(|v| v.exp()).sum::<f64>().ln();
            let nll = lse - row[next.id() as usize];
            ensure((nll - ln32).abs() <= 1e-3, || format!("step {step}: loss {nll}"))?;
        }
    }
    let mut m = ModelInstance::new(named("toy-linearproj-8"), 16).map_err(|e| e.to_string())?;
    let curve = train_toy(&mut m, &data, 500, 3e-3).map_err(|e| e.to_string())?;
    let reached = curve.iter().position(|&l| l < 0.01);
    ensure(reached.is_some(), || {
        format!("final loss {:.4}", curve.last().unwrap())
    })?;
    for (i, (img, gt)) in data.iter().enumerate() {
        let out = m.greedy_decode(img, 64).map_err(|e| e.to_string())?;
        ensure(out.tokens() == gt.tokens(), || {
            format!("table {i} decoded wrongly")
        })?;
    }
    Ok(format!(
        "uniform loss = ln 32 at every step, loss < 0.01 at step {}, final {:.2e}, 8/8 exact decodes",
        reached.unwrap(),
        curve.last().unwrap()
    ))
}

fn ac11() -> Outcome {
    for name in TOY_PRESETS {
        let spec = named(name);
        let m = ModelInstance::new(spec.clone(), 0).map_err(|e| e.to_string())?;
        let (got, want) = (m.scalar_count() as u64, param_count(&spec).total);
        ensure(got == want, || {
            format!("{name}: runtime {got} vs analyzer {want}")
        })?;
    }
    for name in FULL_PRESETS {
        let spec = named(name);
        let got: u64 = parameter_shapes(&spec)
            .iter()
            .map(|(_, s)| s.iter().product::<usize>() as u64)
            .sum();
        let want = param_count(&spec).total;
        ensure(got == want, || {
            format!("{name}: runtime layout {got} vs analyzer {want}")
        })?;
    }
    Ok(format!(
        "{} toy models instantiated, {} full-size layouts, all equal",
        TOY_PRESETS.len(),
        FULL_PRESETS.len()
    ))
}

fn main() {
    let criteria: [Criterion; 11] = [
        ("AC1", "RF exactness", Duration::from_secs(1), ac1),
        ("AC2", "RF-ratio exactness", Duration::from_secs(1), ac2),
        ("AC3", "sequence-length exactness", Duration::from_secs(1), ac3),
        ("AC4", "parameter totals", Duration::from_secs(1), ac4),
        ("AC5", "MAC ordering and magnitude", Duration::from_secs(1), ac5),
        ("AC6", "TEDS oracle equivalence", Duration::from_secs(120), ac6),
        ("AC7", "vocabulary and grammar", Duration::from_secs(60), ac7),
        (
            "AC8",
            "empirical RF = theoretical RF",
            Duration::from_secs(120),
            ac8,
        ),
        ("AC9", "gradient correctness", Duration::from_secs(300), ac9),
        ("AC10", "loss sanity and overfit", Duration::from_secs(600), ac10),
        (
            "AC11",
            "cross-module parameter reconciliation",
            Duration::from_secs(60),
            ac11,
        ),
    ];
    let mut failed = 0;
    for (id, title, budget, check) in criteria {
        let start = Instant::now();
        let outcome = check();
        let took = start.elapsed();
        let outcome = match outcome {
            Ok(detail) if took > budget => Err(format!("{detail}; took {took:.2?}, budget {budget:?}")),
            other => other,
        };
        match outcome {
            Ok(detail) => println!("{id:<5} PASS  {title}: {detail} [{:.2}s]", took.as_secs_f64()),
            Err(why) => {
                failed += 1;
                println!("{id:<5} FAIL  {title}: {why} [{:.2}s]", took.as_secs_f64());
            }
        }
    }
    println!("{} of 11 criteria passed", 11 - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
