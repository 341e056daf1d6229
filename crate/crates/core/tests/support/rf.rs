//! Receptive-field oracle that walks index sets backwards and drops, at every
//! layer, positions outside that layer's input (padding or truncated rows).

use std::collections::BTreeSet;

use rand::Rng;
use tsrlab_core::arch::{trace_geometry, ConvSpec, EncoderSpec, LayerSpec, PoolSpec};

/// Output length of one axis after `layers`, by counting window placements.
pub fn out_len(layers: &[LayerSpec], mut n: i64) -> i64 {
    for l in layers {
        n = layer_out_len(l, n);
    }
    n
}

fn layer_out_len(l: &LayerSpec, n: i64) -> i64 {
    match l {
        LayerSpec::Residual(r) => out_len(&r.main, n),
        _ => {
            let w = l.window().unwrap();
            let span = (w.dilation * (w.kernel - 1)) as i64;
            let padded = n + 2 * w.padding as i64;
            (0..).take_while(|i| i * w.stride as i64 + span < padded).count() as i64
        }
    }
}

/// Input indices of one axis that can influence `outputs`.
pub fn reachable(layers: &[LayerSpec], in_len: i64, outputs: BTreeSet<i64>) -> BTreeSet<i64> {
    let mut lens = vec![in_len];
    for l in layers {
        lens.push(layer_out_len(l, *lens.last().unwrap()));
    }
    let mut cur = outputs;
    for (i, l) in layers.iter().enumerate().rev() {
        let n = lens[i];
        cur = match l {
            LayerSpec::Residual(r) => {
                let mut a = reachable(&r.main, n, cur.clone());
                a.extend(reachable(&r.shortcut, n, cur));
                a
            }
            _ => {
                let w = l.window().unwrap();
                cur.iter()
                    .flat_map(|&o| {
                        (0..w.kernel)
                            .map(move |t| o * w.stride as i64 - w.padding as i64 + (t * w.dilation) as i64)
                    })
                    .filter(|&x| (0..n).contains(&x))
                    .collect()
            }
        };
    }
    cur
}

/// Half-open hull of the reachable input indices.
pub fn reachable_span(layers: &[LayerSpec], in_len: usize, pos: usize) -> (usize, usize) {
    let set = reachable(layers, in_len as i64, BTreeSet::from([pos as i64]));
    match (set.first(), set.last()) {
        (Some(&a), Some(&b)) => (a as usize, b as usize + 1),
        _ => (0, 0),
    }
}

/// Random single-channel stack of convolutions (some dilated), patchify
/// layers and max pools, of depth at most `max_depth`, on a square input.
pub fn random_stack<R: Rng>(rng: &mut R, max_depth: usize, side: usize) -> EncoderSpec {
    loop {
        let depth = rng.gen_range(1..=max_depth);
        let mut layers = Vec::new();
        for _ in 0..depth {
            let k = rng.gen_range(1..=5);
            let s = rng.gen_range(1..=2);
            let p = rng.gen_range(0..=k / 2);
            let d = if k > 1 { rng.gen_range(1..=2) } else { 1 };
            layers.push(match rng.gen_range(0..6) {
                0 => LayerSpec::Patchify {
                    patch: rng.gen_range(1..=3),
                    in_channels: 1,
                    out_channels: 1,
                },
                1 => {
                    let k = k.max(2);
                    LayerSpec::MaxPool(PoolSpec {
                        kernel: k,
                        stride: s,
                        padding: p.min(k / 2),
                    })
                }
                _ => {
                    let mut c = ConvSpec::new(k, s, p, 1, 1).dilated(d);
                    c.relu = rng.gen_bool(0.5);
                    LayerSpec::Conv(c)
                }
            });
        }
        let spec = EncoderSpec::new("random", layers)
            .with_input(side, side)
            .with_channels(1);
        if trace_geometry(&spec).is_ok() {
            return spec;
        }
    }
}
