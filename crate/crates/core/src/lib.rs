//! Table-structure-recognition architecture lab: structure grammar, TEDS
//! scoring, visual-encoder analysis and a small deterministic neural runtime.

pub mod arch;
pub mod grammar;
pub mod nn;
pub mod teds;
