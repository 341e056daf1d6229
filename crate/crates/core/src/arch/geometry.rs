//! Receptive-field recursion through a spatial layer stack.
//!
//! For a layer with kernel `k`, dilation `d`, stride `s` and padding `p`:
//! `rf' = rf + d(k-1)·jump`, `jump' = jump·s`, `start' = start - p·jump`,
//! starting from `rf = jump = 1`, `start = 0`. `start` is the input
//! coordinate of the first pixel seen by output position 0.

use serde::Serialize;

use super::layer::{LayerSpec, Window};
use super::spec::EncoderSpec;
use super::AnalysisError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct GeometryStep {
    pub rf: usize,
    pub jump: usize,
    pub start: i64,
    pub out_size: (usize, usize),
    pub channels: usize,
}

impl GeometryStep {
    fn input(spec: &EncoderSpec) -> Self {
        Self {
            rf: 1,
            jump: 1,
            start: 0,
            out_size: spec.input_size,
            channels: spec.in_channels,
        }
    }

    /// Input rows (or columns) seen by output index `pos`, clipped to
    /// `[0, limit)`. Returned as a half-open range.
    pub fn input_span(&self, pos: usize, limit: usize) -> (usize, usize) {
        let lo = self.start + (pos * self.jump) as i64;
        let hi = lo + self.rf as i64;
        (
            lo.clamp(0, limit as i64) as usize,
            hi.clamp(0, limit as i64) as usize,
        )
    }
}

fn apply_window(
    state: GeometryStep,
    w: Window,
    channels: usize,
    layer: usize,
) -> Result<GeometryStep, AnalysisError> {
    let h = w.output_len(state.out_size.0);
    let wd = w.output_len(state.out_size.1);
    let (Some(h), Some(wd)) = (h, wd) else {
        return Err(AnalysisError::DegenerateOutput {
            layer,
            input: state.out_size,
        });
    };
    Ok(GeometryStep {
        rf: state.rf + (w.extent() - 1) * state.jump,
        jump: state.jump * w.stride,
        start: state.start - (w.padding * state.jump) as i64,
        out_size: (h, wd),
        channels,
    })
}

fn check_channels(expected: usize, found: usize, layer: usize) -> Result<(), AnalysisError> {
    if expected != found {
        return Err(AnalysisError::ChannelMismatch {
            layer,
            expected,
            found,
        });
    }
    Ok(())
}

fn step(state: GeometryStep, l: &LayerSpec, layer: usize) -> Result<GeometryStep, AnalysisError> {
    match l {
        LayerSpec::Conv(c) => {
            check_channels(state.channels, c.in_channels, layer)?;
            apply_window(
                state,
                l.window().expect("conv has a window"),
                c.out_channels,
                layer,
            )
        }
        LayerSpec::Patchify {
            in_channels,
            out_channels,
            ..
        } => {
            check_channels(state.channels, *in_channels, layer)?;
            apply_window(
                state,
                l.window().expect("patchify has a window"),
                *out_channels,
                layer,
            )
        }
        LayerSpec::Pointwise {
            in_features,
            out_features,
            ..
        } => {
            check_channels(state.channels, *in_features, layer)?;
            apply_window(state, Window::IDENTITY, *out_features, layer)
        }
        LayerSpec::MaxPool(_) => apply_window(
            state,
            l.window().expect("pool has a window"),
            state.channels,
            layer,
        ),
        LayerSpec::Residual(r) => {
            let main = r.main.iter().try_fold(state, |s, sub| step(s, sub, layer))?;
            let short = r.shortcut.iter().try_fold(state, |s, sub| step(s, sub, layer))?;
            if main.out_size != short.out_size || main.jump != short.jump || main.channels != short.channels {
                return Err(AnalysisError::BranchMismatch { layer });
            }
            // Union of the two branches' input windows.
            let start = main.start.min(short.start);
            let end = (main.start + main.rf as i64).max(short.start + short.rf as i64);
            Ok(GeometryStep {
                rf: (end - start) as usize,
                start,
                ..main
            })
        }
        _ => Err(AnalysisError::NotSpatial { layer }),
    }
}

/// Per-layer receptive field, jump, offset and output size.
pub fn trace_geometry(spec: &EncoderSpec) -> Result<Vec<GeometryStep>, AnalysisError> {
    let mut state = GeometryStep::input(spec);
    let mut out = Vec::with_capacity(spec.layers.len());
    for (i, l) in spec.layers.iter().enumerate() {
        state = step(state, l, i)?;
        out.push(state);
    }
    Ok(out)
}

/// Geometry after the last layer (the input itself for an empty stack).
pub fn final_geometry(spec: &EncoderSpec) -> Result<GeometryStep, AnalysisError> {
    Ok(trace_geometry(spec)?
        .last()
        .copied()
        .unwrap_or_else(|| GeometryStep::input(spec)))
}

/// Percentage with two decimals, stored as an integer number of hundredths.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Percent(u32);

impl Percent {
    /// `num / den` as a percentage, rounded half-up to two decimals.
    pub fn from_ratio(num: u64, den: u64) -> Self {
        assert!(den > 0);
        Percent(((num * 10_000 * 2 + den) / (2 * den)) as u32)
    }

    pub fn hundredths(self) -> u32 {
        self.0
    }

    pub fn value(self) -> f64 {
        self.0 as f64 / 100.0
    }
}

impl std::fmt::Display for Percent {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}.{:02}", self.0 / 100, self.0 % 100)
    }
}

impl Serialize for Percent {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_f64(self.value())
    }
}

/// `min(rf / side, 1)` in percent. Non-square inputs use the shorter side.
pub fn rf_ratio(spec: &EncoderSpec) -> Result<Percent, AnalysisError> {
    let g = final_geometry(spec)?;
    let side = spec.input_size.0.min(spec.input_size.1) as u64;
    Ok(Percent::from_ratio((g.rf as u64).min(side), side))
}

/// Number of feature positions handed to the transformer.
pub fn sequence_length(spec: &EncoderSpec) -> Result<usize, AnalysisError> {
    let g = final_geometry(spec)?;
    Ok(g.out_size.0 * g.out_size.1)
}
