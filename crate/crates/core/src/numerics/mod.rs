//! Minimal dense-tensor math with reverse-mode automatic differentiation,
//! the neural building blocks (linear layer, GRU cell, softmax, losses),
//! and the Adam optimizer.
//!
//! Everything computes in f64. Forward passes are deterministic and
//! produce an error, not a NaN, when a value leaves the finite range.

mod adam;
mod checkpoint;
pub mod gradcheck;
mod nn;
mod params;
mod tape;
mod tensor;

pub use adam::{Adam, AdamConfig};
pub use checkpoint::{load_checkpoint, save_checkpoint, CHECKPOINT_FORMAT_VERSION};
pub use nn::{gru_cell, GruParams, LinearParams};
pub use params::{Grads, ParamId, ParamSet, Parameter};
pub use tape::{Tape, TensorId};
pub use tensor::Tensor;

pub(crate) use tape::{sigmoid, softmax_raw};

/// Stable softmax of a plain slice (no tape involvement).
pub fn softmax_slice(xs: &[f64]) -> Vec<f64> {
    softmax_raw(xs)
}

use thiserror::Error;

#[derive(Debug, Error)]
pub enum NumericsError {
    #[error("shape mismatch in {op}: {detail}")]
    ShapeMismatch { op: &'static str, detail: String },
    #[error("index {index} out of range {len} in {op}")]
    IndexOutOfRange { op: &'static str, index: usize, len: usize },
    #[error("non-finite value produced by {op}")]
    NonFinite { op: &'static str },
    #[error("{op} requires a scalar node")]
    NotScalar { op: &'static str },
    #[error("backward called twice without a fresh forward pass")]
    BackwardTwice,
    #[error("optimizer step without accumulated gradients")]
    MissingGrads,
    #[error("duplicate parameter name {name}")]
    DuplicateParam { name: String },
    #[error("checkpoint format error: {detail}")]
    CheckpointFormat { detail: String },
    #[error("io error on {path}: {source}")]
    Io { path: String, source: std::io::Error },
}
