//! Multiway: a toolkit for turning flat data into N-way tensors and working
//! with them. It provides dense and sparse tensor types with the standard
//! multilinear operations, CP, Tucker, and tensor-train decompositions,
//! tensor-input regression and completion, a tensor-train fully connected
//! layer, Hankelization-based blind source separation, and text formats for
//! moving tensors and fitted models between runs.

pub mod bss;
pub mod compress;
pub mod decomp;
pub mod error;
pub mod io;
pub mod learn;
pub mod linalg;
pub mod tensor;
pub mod tensorize;

pub use error::{Error, Result};
