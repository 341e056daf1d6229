//! Static analysis of encoder/decoder layer stacks: receptive field, sequence
//! length, parameter and MAC counts.

mod complexity;
mod geometry;
mod layer;
mod presets;
mod report;
mod spec;

use thiserror::Error;

pub use complexity::{mac_count, param_count, StageCounts};
pub use geometry::{final_geometry, rf_ratio, sequence_length, trace_geometry, GeometryStep, Percent};
pub use layer::{
    attention_params, ffn_params, ConvSpec, LayerSpec, PoolSpec, ResidualSpec, TransformerDims, Window,
};
pub use presets::{
    conv_stem, linear_proj, preset, preset_names, FULL_PRESETS, TOY_INPUT, TOY_MAX_LEN, TOY_PRESETS,
};
pub use report::{render_table, report, AnalysisReport};
pub use spec::{EncoderSpec, FullModelSpec, Stage};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum AnalysisError {
    #[error("layer {layer} produces an empty feature map from a {}x{} input", input.0, input.1)]
    DegenerateOutput { layer: usize, input: (usize, usize) },
    #[error("layer {layer} declares {found} input channels but receives {expected}")]
    ChannelMismatch {
        layer: usize,
        expected: usize,
        found: usize,
    },
    #[error("residual block at layer {layer} has branches of different shape")]
    BranchMismatch { layer: usize },
    #[error("layer {layer} is not a spatial layer")]
    NotSpatial { layer: usize },
    #[error("unknown preset `{0}`")]
    UnknownPreset(String),
    #[error("invalid dimensions: {reason}")]
    InvalidDims { reason: String },
}
