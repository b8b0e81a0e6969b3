//! Plain-text tensor exchange format.
//!
//! Line 1 is `shape: I1,I2,...,IN`; every following line is
//! `i1,...,iN,value` with 0-based indices. Sparse tensors list only their
//! stored entries, dense tensors list every cell, and matrices are the
//! 2-way case. Blank lines and `#` comments are ignored. Scalars render
//! through [`format_g17`](super::format_g17) so round-trips are bit-exact.

use super::scalars::format_g17;
use crate::error::{Error, Result};
use crate::tensor::{densify_budget, DenseTensor, Matrix, SparseTensor};
use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::path::Path;

pub fn sparse_to_string(t: &SparseTensor) -> String {
    let mut out = shape_line(t.shape().dims());
    for (idx, v) in t.iter() {
        push_entry(&mut out, idx, v);
    }
    out
}

pub fn dense_to_string(t: &DenseTensor) -> String {
    let mut out = shape_line(t.shape().dims());
    crate::tensor::dense::for_each_index(t.shape(), |off, idx| {
        push_entry(&mut out, idx, t.data()[off]);
    });
    out
}

pub fn matrix_to_string(m: &Matrix) -> String {
    dense_to_string(&DenseTensor::from_matrix(m))
}

pub fn vector_to_string(v: &[f64]) -> String {
    let mut out = shape_line(&[v.len()]);
    for (i, x) in v.iter().enumerate() {
        push_entry(&mut out, &[i], *x);
    }
    out
}

fn shape_line(dims: &[usize]) -> String {
    format!("shape: {}\n", join_usizes(dims))
}

fn push_entry(out: &mut String, idx: &[usize], v: f64) {
    for i in idx {
        let _ = write!(out, "{i},");
    }
    let _ = writeln!(out, "{}", format_g17(v));
}

pub(crate) fn join_usizes(values: &[usize]) -> String {
    values
        .iter()
        .map(|d| d.to_string())
        .collect::<Vec<_>>()
        .join(",")
}

/// Parses the text format. `origin` names the source (a path, usually) in
/// errors. Entries must be unique; explicit zeros are accepted and simply
/// not stored.
pub fn parse_sparse(src: &str, origin: &str) -> Result<SparseTensor> {
    parse_sparse_lines(content_lines(src), origin)
}

/// Same parser over pre-numbered lines, so embedded blocks keep their file
/// line numbers in errors.
pub(crate) fn parse_sparse_lines<'a>(
    lines: impl Iterator<Item = (usize, &'a str)>,
    origin: &str,
) -> Result<SparseTensor> {
    let mut lines = lines;
    let (line_no, first) = lines
        .next()
        .ok_or_else(|| Error::parse(origin, 0, "empty tensor file"))?;
    let dims_text = first
        .strip_prefix("shape:")
        .ok_or_else(|| Error::parse(origin, line_no, "expected a `shape:` line"))?;
    let dims = parse_usizes(dims_text)
        .map_err(|m| Error::parse(origin, line_no, m))?;
    let shape = crate::tensor::Shape::new(dims)
        .map_err(|e| Error::parse(origin, line_no, e.to_string()))?;
    let order = shape.order();

    let mut t = SparseTensor::new(shape);
    let mut seen = BTreeSet::new();
    for (line_no, line) in lines {
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        if fields.len() != order + 1 {
            return Err(Error::parse(
                origin,
                line_no,
                format!("expected {} comma-separated fields, got {}", order + 1, fields.len()),
            ));
        }
        let mut idx = Vec::with_capacity(order);
        for f in &fields[..order] {
            idx.push(f.parse::<usize>().map_err(|_| {
                Error::parse(origin, line_no, format!("bad index `{f}`"))
            })?);
        }
        let value: f64 = fields[order]
            .parse()
            .map_err(|_| Error::parse(origin, line_no, format!("bad value `{}`", fields[order])))?;
        if !seen.insert(idx.clone()) {
            return Err(Error::parse(origin, line_no, "duplicate entry"));
        }
        t.insert(idx, value)
            .map_err(|e| Error::parse(origin, line_no, e.to_string()))?;
    }
    Ok(t)
}

/// Numbered non-empty, non-comment lines.
pub(crate) fn content_lines(src: &str) -> impl Iterator<Item = (usize, &str)> {
    src.lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'))
}

pub(crate) fn parse_usizes(text: &str) -> std::result::Result<Vec<usize>, String> {
    text.split(',')
        .map(str::trim)
        .map(|f| f.parse::<usize>().map_err(|_| format!("bad count `{f}`")))
        .collect()
}

pub fn read_sparse_tensor(path: &Path) -> Result<SparseTensor> {
    let src = std::fs::read_to_string(path)?;
    parse_sparse(&src, &path.display().to_string())
}

/// Reads the text format and densifies it under the ambient budget.
pub fn read_dense_tensor(path: &Path) -> Result<DenseTensor> {
    read_sparse_tensor(path)?.to_dense(densify_budget())
}

/// Reads a 2-way tensor file as a matrix.
pub fn read_matrix(path: &Path) -> Result<Matrix> {
    let t = read_dense_tensor(path)?;
    t.to_matrix()
}

/// Reads a 1-way tensor file as a vector.
pub fn read_vector(path: &Path) -> Result<Vec<f64>> {
    let t = read_dense_tensor(path)?;
    if t.order() != 1 {
        return Err(Error::ShapeMismatch {
            expected: "a 1-way tensor".to_string(),
            got: format!("order {}", t.order()),
        });
    }
    Ok(t.into_data())
}
