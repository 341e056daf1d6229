//! Evaluation harness and command-line front end for `tsrlab-core`.

pub mod cli;
pub mod eval;
