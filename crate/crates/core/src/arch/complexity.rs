//! Parameter and multiply-accumulate counts.
//!
//! MAC conventions: a convolution costs `k²·C_in·C_out·H_out·W_out` (dilation
//! and bias are free), a per-position linear map costs `in·out` per position,
//! attention costs its four projections plus `QKᵀ` and `AV`. Pooling,
//! normalization, activations and residual additions cost nothing.

use std::collections::BTreeMap;

use serde::Serialize;

use super::geometry::final_geometry;
use super::layer::{LayerSpec, TransformerDims};
use super::spec::{FullModelSpec, Stage};
use super::AnalysisError;

/// Per-stage totals, keyed by stage name.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct StageCounts {
    pub total: u64,
    pub by_stage: BTreeMap<&'static str, u64>,
}

impl StageCounts {
    fn add(&mut self, stage: Stage, n: u64) {
        *self.by_stage.entry(stage.name()).or_default() += n;
        self.total += n;
    }

    pub fn stage(&self, stage: Stage) -> u64 {
        self.by_stage.get(stage.name()).copied().unwrap_or(0)
    }
}

pub fn param_count(spec: &FullModelSpec) -> StageCounts {
    let mut out = StageCounts::default();
    for s in Stage::ALL {
        out.by_stage.insert(s.name(), 0);
    }
    for (stage, l) in spec.layers() {
        out.add(stage, l.param_count() as u64);
    }
    out
}

/// MACs of one spatial layer applied to an `(h, w)` feature map; returns the
/// cost and the output size.
fn spatial_macs(
    l: &LayerSpec,
    size: (usize, usize),
    layer: usize,
) -> Result<(u64, (usize, usize)), AnalysisError> {
    let out_size = |w: super::layer::Window| match (w.output_len(size.0), w.output_len(size.1)) {
        (Some(h), Some(wd)) => Ok((h, wd)),
        _ => Err(AnalysisError::DegenerateOutput { layer, input: size }),
    };
    match l {
        LayerSpec::Conv(c) => {
            let o = out_size(l.window().unwrap())?;
            Ok((c.weight_count() as u64 * (o.0 * o.1) as u64, o))
        }
        LayerSpec::Patchify {
            patch,
            in_channels,
            out_channels,
        } => {
            let o = out_size(l.window().unwrap())?;
            let per = (patch * patch * in_channels * out_channels) as u64;
            Ok((per * (o.0 * o.1) as u64, o))
        }
        LayerSpec::Pointwise {
            in_features,
            out_features,
            ..
        } => Ok(((in_features * out_features * size.0 * size.1) as u64, size)),
        LayerSpec::MaxPool(_) => Ok((0, out_size(l.window().unwrap())?)),
        LayerSpec::Residual(r) => {
            let mut total = 0;
            let mut main = size;
            for sub in &r.main {
                let (m, o) = spatial_macs(sub, main, layer)?;
                total += m;
                main = o;
            }
            let mut short = size;
            for sub in &r.shortcut {
                let (m, o) = spatial_macs(sub, short, layer)?;
                total += m;
                short = o;
            }
            if main != short {
                return Err(AnalysisError::BranchMismatch { layer });
            }
            Ok((total, main))
        }
        _ => Err(AnalysisError::NotSpatial { layer }),
    }
}

/// Self-attention over `n` queries and `m` keys, including all projections.
fn attention_macs(d: u64, n: u64, m: u64) -> u64 {
    // Q and output projections on the queries, K and V on the keys.
    2 * d * d * n + 2 * d * d * m + 2 * n * m * d
}

fn ffn_macs(t: &TransformerDims, n: u64) -> u64 {
    2 * (t.d_model * t.d_ff) as u64 * n
}

/// MACs for one forward pass: the encoder over `N` positions and one
/// teacher-forced decoder pass over `decode_len` tokens.
pub fn mac_count(spec: &FullModelSpec) -> Result<StageCounts, AnalysisError> {
    let mut out = StageCounts::default();
    for s in Stage::ALL {
        out.by_stage.insert(s.name(), 0);
    }
    let g = final_geometry(&spec.encoder)?;
    let n = (g.out_size.0 * g.out_size.1) as u64;
    let l = spec.decode_len as u64;
    let mut size = spec.encoder.input_size;
    for (i, (stage, layer)) in spec.layers().into_iter().enumerate() {
        let cost = match (&layer, stage) {
            (_, Stage::VisualEncoder) => {
                let (m, o) = spatial_macs(&layer, size, i)?;
                size = o;
                m
            }
            (LayerSpec::TransformerEncoder(t), _) => {
                let d = t.d_model as u64;
                attention_macs(d, n, n) + ffn_macs(t, n)
            }
            (LayerSpec::TransformerDecoder(t), _) => {
                let d = t.d_model as u64;
                attention_macs(d, l, l) + attention_macs(d, l, n) + ffn_macs(t, l)
            }
            (
                LayerSpec::Pointwise {
                    in_features,
                    out_features,
                    ..
                },
                _,
            ) => (in_features * out_features) as u64 * l,
            _ => 0,
        };
        out.add(stage, cost);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::arch::layer::ConvSpec;
    use crate::arch::spec::EncoderSpec;

    #[test]
    fn single_conv_macs() {
        let enc = EncoderSpec::new("c", vec![LayerSpec::Conv(ConvSpec::new(3, 1, 1, 3, 8))]).with_input(4, 4);
        let (m, o) = spatial_macs(&enc.layers[0], enc.input_size, 0).unwrap();
        assert_eq!((m, o), (3_456, (4, 4)));
    }

    #[test]
    fn stage_totals_add_up() {
        let enc = EncoderSpec::new(
            "p",
            vec![LayerSpec::Patchify {
                patch: 28,
                in_channels: 3,
                out_channels: 512,
            }],
        );
        let spec = FullModelSpec::full_size(enc, 4);
        let p = param_count(&spec);
        assert_eq!(p.by_stage.values().sum::<u64>(), p.total);
        assert_eq!(p.stage(Stage::VisualEncoder), 1_204_736);
        assert_eq!(p.stage(Stage::Embeddings), 32 * 512);
        assert_eq!(p.stage(Stage::OutputHead), 512 * 32 + 32);
        let m = mac_count(&spec).unwrap();
        assert_eq!(m.by_stage.values().sum::<u64>(), m.total);
        assert_eq!(m.stage(Stage::VisualEncoder), 28 * 28 * 3 * 512 * 256);
        assert_eq!(m.stage(Stage::OutputHead), 512 * 32 * 512);
    }
}
