//! Minimal reverse-mode automatic differentiation over dense arrays.
//!
//! Operations are coarse-grained: each op (a convolution, a batch of
//! bilinear samples, a whole rasterization) records one node on the [`Tape`]
//! together with a closure that maps the output adjoint to input adjoints.
//! Other modules add their own ops through [`Tape::custom`].

mod array;
mod conv;
mod gemm;
pub mod gradcheck;
mod mlp;
mod ops;
pub(crate) mod sample;
mod tape;

pub use array::Array;
pub use conv::{conv2d_forward, conv3d_forward};
pub use gemm::gemm;
pub use mlp::{Activation, DenseLayer};
pub use sample::{bilinear_at, trilinear_at, OUT_OF_VIEW};
pub use tape::{Tape, Var};

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DiffError {
    #[error("shape mismatch in {op}: {detail}")]
    Shape { op: &'static str, detail: String },
    #[error("backward requires a scalar loss, got shape {0:?}")]
    NonScalarLoss(Vec<usize>),
    #[error("invalid argument to {op}: {detail}")]
    Invalid { op: &'static str, detail: String },
}

pub(crate) fn shape_err(op: &'static str, detail: impl Into<String>) -> DiffError {
    DiffError::Shape {
        op,
        detail: detail.into(),
    }
}
