//! Text file formats: tensors, fitted models, CSV tables, and the scalar
//! rendering they share. Writers go through [`write_atomic`] so readers
//! never observe a half-written file.

mod models;
mod scalars;
mod tables;
mod tensors;

pub use models::{model_to_string, parse_model, read_model, write_model, ModelFile};
pub use scalars::format_g17;
pub use tables::{
    axis_maps_to_csv, read_regression_samples, read_table, table_from_reader, write_axis_maps,
};
pub use tensors::{
    dense_to_string, matrix_to_string, parse_sparse, read_dense_tensor, read_matrix,
    read_sparse_tensor, read_vector, sparse_to_string, vector_to_string,
};

use crate::error::{Error, Result};
use std::path::Path;

/// Writes `content` to a sibling temp file and renames it over `path`, so
/// the destination is always either the old file or the complete new one.
pub fn write_atomic(path: &Path, content: &str) -> Result<()> {
    let name = path
        .file_name()
        .ok_or_else(|| Error::invalid(format!("not a writable path: {}", path.display())))?;
    let tmp = path.with_file_name(format!(
        ".{}.{}.tmp",
        name.to_string_lossy(),
        std::process::id()
    ));
    std::fs::write(&tmp, content)?;
    std::fs::rename(&tmp, path).map_err(|e| {
        let _ = std::fs::remove_file(&tmp);
        Error::from(e)
    })
}
