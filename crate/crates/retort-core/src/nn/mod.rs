//! Dense f64 tensors with a reverse-mode tape.
//!
//! Small on purpose: the shapes used by this crate are vectors, matrices and
//! scalars, reductions run in index order, and every forward op validates
//! that its output is finite. Training a model is single-writer — one tape,
//! one parameter store, one step at a time; frozen stores are safe to share
//! read-only.

mod fdiff;
mod layers;
mod linalg;
mod mmd;
mod store;
mod tape;
mod tensor;

pub use fdiff::{finite_diff_grad, max_param_rel_err, relative_error};
pub use layers::{
    gaussian_reparam, glorot, gru_cell, gru_layer_step, linear, linear_no_bias,
    register_gru_stack, register_linear, register_projection, register_vector, GruStackSpec,
};
pub use linalg::{jacobi_eigh, psd_matrix_sqrt};
pub use mmd::MmdKernel;
pub use store::{adam_step, AdamHyper, ParameterStore};
pub use tape::{Gradients, Tape, Var};
pub use tensor::Tensor;

use crate::prelude::*;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum NnError {
    #[error("shape mismatch in {op}: {details}")]
    ShapeMismatch { op: &'static str, details: String },
    #[error("non-finite value produced by {op}")]
    NonFinite { op: &'static str },
    #[error("unknown parameter `{0}`")]
    UnknownParam(String),
    #[error("duplicate parameter `{0}`")]
    DuplicateParam(String),
    #[error("matrix is not symmetric within tolerance")]
    NotSymmetric,
}

pub(crate) fn shape_err(op: &'static str, details: impl Into<String>) -> NnError {
    NnError::ShapeMismatch {
        op,
        details: details.into(),
    }
}
