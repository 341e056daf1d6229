//! Empirical receptive field: which input pixels can move one output feature.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::model::{declare_spatial, initialize, Forward, ModelInstance, ParamStore};
use super::tensor::Tensor;
use super::NnError;
use crate::arch::{final_geometry, ConvSpec, EncoderSpec, LayerSpec, ResidualSpec};

/// Half-open pixel rectangle.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct BBox {
    pub rows: (usize, usize),
    pub cols: (usize, usize),
}

impl BBox {
    pub fn height(&self) -> usize {
        self.rows.1 - self.rows.0
    }

    pub fn width(&self) -> usize {
        self.cols.1 - self.cols.0
    }
}

impl std::fmt::Display for BBox {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "rows [{}, {}) x cols [{}, {})",
            self.rows.0, self.rows.1, self.cols.0, self.cols.1
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ProbeMethod {
    /// Support of the input gradient of one output feature.
    Gradient,
    /// Light blocks of input rows (then columns) on a dark image and bisect
    /// for the outermost ones that still reach the output.
    Bisect,
    /// Gradient, or Bisect when the stack contains max pooling (whose
    /// gradient only reaches the arg-max).
    Auto,
}

fn has_pool(layers: &[LayerSpec]) -> bool {
    layers.iter().any(|l| match l {
        LayerSpec::MaxPool(_) => true,
        LayerSpec::Residual(r) => has_pool(&r.main) || has_pool(&r.shortcut),
        _ => false,
    })
}

/// Box predicted by the receptive-field recursion, clipped to the image.
pub fn theoretical_box(spec: &EncoderSpec, out_pos: (usize, usize)) -> Result<BBox, NnError> {
    let g = final_geometry(spec)?;
    let (h, w) = spec.input_size;
    Ok(BBox {
        rows: g.input_span(out_pos.0, h),
        cols: g.input_span(out_pos.1, w),
    })
}

/// Strictly positive copy of a parameter set, so no path can cancel another.
pub fn positive(params: &ParamStore) -> ParamStore {
    params.map(|x| x.abs() + 0.05)
}

fn check_pos(oh: usize, ow: usize, out_pos: (usize, usize)) {
    assert!(
        out_pos.0 < oh && out_pos.1 < ow,
        "output position outside the {oh}x{ow} map"
    );
}

fn span(hits: impl Iterator<Item = usize>) -> (usize, usize) {
    let v: Vec<usize> = hits.collect();
    match (v.first(), v.last()) {
        (Some(&a), Some(&b)) => (a, b + 1),
        _ => (0, 0),
    }
}

/// Smallest `i` in `0..n` with `pred(i)`, for a predicate that is false then true.
fn first_true(n: usize, pred: impl Fn(usize) -> bool) -> Option<usize> {
    let (mut lo, mut hi) = (0, n);
    while lo < hi {
        let mid = (lo + hi) / 2;
        if pred(mid) {
            hi = mid;
        } else {
            lo = mid + 1;
        }
    }
    (lo < n).then_some(lo)
}

/// Measures the input region feeding channel 0 of the output at `out_pos`.
/// `params` must be strictly positive (see [`positive`]) so that no two paths
/// cancel.
pub fn probe_encoder(
    spec: &EncoderSpec,
    params: &ParamStore,
    out_pos: (usize, usize),
    method: ProbeMethod,
) -> Result<BBox, NnError> {
    final_geometry(spec)?;
    let (h, w) = spec.input_size;
    let c = spec.in_channels;
    let method = match method {
        ProbeMethod::Auto if has_pool(&spec.layers) => ProbeMethod::Bisect,
        ProbeMethod::Auto => ProbeMethod::Gradient,
        m => m,
    };
    match method {
        ProbeMethod::Gradient => {
            let mut f = Forward::new(params, false);
            let x = f.g.param(Tensor::full(&[c, h, w], 1.0));
            let y = f.visual(x, &spec.layers);
            let (_, oh, ow) = f.g.value(y).dims3();
            check_pos(oh, ow, out_pos);
            let root = f.g.pick(y, out_pos.0 * ow + out_pos.1);
            let grads = f.g.backward(root);
            let gx = grads.get(x).expect("input gradient");
            let hit = |r: usize, col: usize| (0..c).any(|ch| gx.data()[(ch * h + r) * w + col] != 0.0);
            Ok(BBox {
                rows: span((0..h).filter(|&r| (0..w).any(|col| hit(r, col)))),
                cols: span((0..w).filter(|&col| (0..h).any(|r| hit(r, col)))),
            })
        }
        ProbeMethod::Bisect => {
            // Without biases and with a dark image every activation is exactly
            // zero; lighting pixels makes the output positive iff one of them
            // has a path to it. No rounding is involved, however deep the stack.
            let unbiased = params.map_named(|name, x| {
                if name.ends_with(".bias") || name.ends_with(".beta") {
                    0.0
                } else {
                    x
                }
            });
            let reaches = |rows: (usize, usize), cols: (usize, usize)| {
                let mut t = Tensor::zeros(&[c, h, w]);
                for ch in 0..c {
                    for r in rows.0..rows.1 {
                        for v in &mut t.data_mut()[(ch * h + r) * w + cols.0..(ch * h + r) * w + cols.1] {
                            *v = 1.0;
                        }
                    }
                }
                let mut f = Forward::new(&unbiased, false);
                let x = f.g.constant(t);
                let y = f.visual(x, &spec.layers);
                let (_, oh, ow) = f.g.value(y).dims3();
                check_pos(oh, ow, out_pos);
                f.g.value(y).data()[out_pos.0 * ow + out_pos.1] > 0.0
            };
            if !reaches((0, h), (0, w)) {
                return Ok(BBox {
                    rows: (0, 0),
                    cols: (0, 0),
                });
            }
            let outer = |n: usize, block: &(dyn Fn(usize, usize) -> bool + Sync)| {
                let (lo, hi) = rayon::join(
                    || first_true(n, |i| block(0, i + 1)),
                    || first_true(n, |i| block(n - 1 - i, n)).map(|i| n - i),
                );
                (lo.expect("whole image reaches"), hi.expect("whole image reaches"))
            };
            let (rows, cols) = rayon::join(
                || outer(h, &|a, b| reaches((a, b), (0, w))),
                || outer(w, &|a, b| reaches((0, h), (a, b))),
            );
            Ok(BBox { rows, cols })
        }
        ProbeMethod::Auto => unreachable!(),
    }
}

fn narrow_layer(l: &LayerSpec) -> LayerSpec {
    match l {
        LayerSpec::Conv(c) => LayerSpec::Conv(ConvSpec {
            in_channels: 1,
            out_channels: 1,
            ..*c
        }),
        LayerSpec::Patchify { patch, .. } => LayerSpec::Patchify {
            patch: *patch,
            in_channels: 1,
            out_channels: 1,
        },
        LayerSpec::Pointwise { bias, .. } => LayerSpec::Pointwise {
            in_features: 1,
            out_features: 1,
            bias: *bias,
        },
        LayerSpec::Residual(r) => LayerSpec::Residual(ResidualSpec {
            main: r.main.iter().map(narrow_layer).collect(),
            shortcut: r.shortcut.iter().map(narrow_layer).collect(),
            relu: r.relu,
        }),
        other => other.clone(),
    }
}

/// Same geometry with every channel count set to one. Receptive fields do
/// not depend on width, so this makes full-resolution probes cheap.
pub fn narrow(spec: &EncoderSpec) -> EncoderSpec {
    EncoderSpec {
        layers: spec.layers.iter().map(narrow_layer).collect(),
        in_channels: 1,
        ..spec.clone()
    }
}

/// Fresh positive parameters for a visual stack.
pub fn positive_params(spec: &EncoderSpec, seed: u64) -> ParamStore {
    let mut decl = Vec::new();
    for (i, l) in spec.layers.iter().enumerate() {
        declare_spatial(&mut decl, &format!("visual.{i}"), l);
    }
    positive(&initialize(decl, &mut ChaCha8Rng::seed_from_u64(seed)))
}

impl ModelInstance {
    /// Input box feeding the visual feature at `out_pos`, measured with this
    /// model's weights made strictly positive.
    pub fn empirical_rf(&self, out_pos: (usize, usize)) -> Result<BBox, NnError> {
        probe_encoder(
            &self.spec().encoder,
            &positive(self.params()),
            out_pos,
            ProbeMethod::Auto,
        )
    }
}
