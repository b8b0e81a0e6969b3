//! Dense and sparse N-way tensors with the multilinear primitives the rest
//! of the crate builds on: unfolding and folding, mode-n products, outer and
//! Khatri-Rao products, and the usual norms.

pub(crate) mod dense;
mod matrix;
mod norms;
mod shape;
mod sparse;

pub use dense::DenseTensor;
pub use matrix::Matrix;
pub use norms::{vector_norm, PNorm};
pub use shape::Shape;
pub use sparse::{densify_budget, SparseTensor, DEFAULT_DENSIFY_BUDGET, DENSIFY_BUDGET_ENV};
