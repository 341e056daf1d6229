//! Small reverse-mode autodiff runtime and the encoder/decoder model built on it.
//! Everything runs in `f64` on the CPU and is deterministic for a given seed.

mod checkpoint;
mod gradcheck;
mod graph;
mod model;
mod probe;
mod synth;
mod tensor;
mod train;

use thiserror::Error;

use crate::arch::AnalysisError;
use crate::grammar::GrammarError;

pub use checkpoint::{load_checkpoint, save_checkpoint, CHECKPOINT_VERSION};
pub use gradcheck::{grad_check, relative_error, GradCheckReport, GroupCheck, FLOOR, STEP};
pub use graph::{Conv2d, Grads, Graph, Var};
pub use model::{parameter_shapes, sinusoid, sinusoid_2d, ModelInstance, ParamStore, RuntimeConfig};
pub use probe::{narrow, positive, positive_params, probe_encoder, theoretical_box, BBox, ProbeMethod};
pub use synth::{synth_dataset, synth_tables, SynthTable, SYNTH_SIZE};
pub use tensor::{matmul, matmul_at, matmul_bt, Tensor};
pub use train::{train, train_toy, write_loss_csv, AdamW, TrainConfig};

#[derive(Debug, Error)]
pub enum NnError {
    #[error("shape mismatch: expected {expected:?}, found {found:?}")]
    ShapeMismatch { expected: Vec<usize>, found: Vec<usize> },
    #[error("target sequence has nothing to predict")]
    EmptySequence,
    #[error("target sequence does not start with <sos>")]
    MissingStart,
    #[error("sequence of {len} tokens exceeds the model limit of {max}")]
    LengthExceeded { len: usize, max: usize },
    #[error("invalid model: {0}")]
    InvalidSpec(String),
    #[error("training diverged at step {step}")]
    Divergence { step: usize },
    #[error(transparent)]
    Analysis(#[from] AnalysisError),
    #[error(transparent)]
    Grammar(#[from] GrammarError),
    #[error("bad checkpoint: {0}")]
    Checkpoint(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
