//! Text container for fitted models.
//!
//! A container starts with a `kind:` line, continues with header lines, and
//! then carries one `block <name>` section per factor, core, or bias, each
//! holding a tensor in the text format from [`super::tensors`]. All kinds:
//!
//! ```text
//! kind: cp | tucker | tt | tt-layer | cp-regression | tucker-regression
//! shape: I1,...,IN
//! ranks: ...            (cp: R; tucker: R1..RN; tt and tt-layer: r0..rN)
//! weights: w1,...,wR            (cp)
//! input-dims / output-dims      (tt-layer)
//! covariate-weights / residual-scale   (regressions)
//! block <name>
//! shape: ...
//! <entries>
//! ```

use super::scalars::format_g17;
use super::tensors::{content_lines, dense_to_string, join_usizes, parse_sparse_lines, parse_usizes, vector_to_string};
use crate::compress::TtLayer;
use crate::decomp::{CpModel, TtModel, TuckerModel};
use crate::error::{Error, Result};
use crate::learn::{CpRegression, TuckerRegression};
use crate::tensor::{DenseTensor, Matrix};
use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

/// Any model the container format can hold.
#[derive(Debug, Clone)]
pub enum ModelFile {
    Cp(CpModel),
    Tucker(TuckerModel),
    Tt(TtModel),
    TtLayer(TtLayer),
    CpRegression(CpRegression),
    TuckerRegression(TuckerRegression),
}

impl ModelFile {
    pub fn kind(&self) -> &'static str {
        match self {
            ModelFile::Cp(_) => "cp",
            ModelFile::Tucker(_) => "tucker",
            ModelFile::Tt(_) => "tt",
            ModelFile::TtLayer(_) => "tt-layer",
            ModelFile::CpRegression(_) => "cp-regression",
            ModelFile::TuckerRegression(_) => "tucker-regression",
        }
    }
}

fn join_floats(values: &[f64]) -> String {
    values
        .iter()
        .map(|v| format_g17(*v))
        .collect::<Vec<_>>()
        .join(",")
}

fn matrix_block(out: &mut String, name: &str, m: &Matrix) {
    let _ = writeln!(out, "block {name}");
    out.push_str(&dense_to_string(&DenseTensor::from_matrix(m)));
}

fn tensor_block(out: &mut String, name: &str, t: &DenseTensor) {
    let _ = writeln!(out, "block {name}");
    out.push_str(&dense_to_string(t));
}

pub fn model_to_string(model: &ModelFile) -> String {
    let mut out = format!("kind: {}\n", model.kind());
    match model {
        ModelFile::Cp(m) => {
            let _ = writeln!(out, "shape: {}", join_usizes(&m.dims()));
            let _ = writeln!(out, "ranks: {}", m.rank());
            let _ = writeln!(out, "weights: {}", join_floats(m.weights()));
            for (k, f) in m.factors().iter().enumerate() {
                matrix_block(&mut out, &format!("factor{k}"), f);
            }
        }
        ModelFile::Tucker(m) => {
            let _ = writeln!(out, "shape: {}", join_usizes(&m.dims()));
            let _ = writeln!(out, "ranks: {}", join_usizes(&m.ranks()));
            tensor_block(&mut out, "core", m.core());
            for (k, f) in m.factors().iter().enumerate() {
                matrix_block(&mut out, &format!("factor{k}"), f);
            }
        }
        ModelFile::Tt(m) => {
            let _ = writeln!(out, "shape: {}", join_usizes(&m.dims()));
            let _ = writeln!(out, "ranks: {}", join_usizes(&m.ranks()));
            for (k, c) in m.cores().iter().enumerate() {
                tensor_block(&mut out, &format!("core{k}"), c);
            }
        }
        ModelFile::TtLayer(m) => {
            let paired: Vec<usize> = m
                .output_dims()
                .iter()
                .zip(m.input_dims())
                .map(|(n, mm)| n * mm)
                .collect();
            let _ = writeln!(out, "shape: {}", join_usizes(&paired));
            let _ = writeln!(out, "ranks: {}", join_usizes(&m.ranks()));
            let _ = writeln!(out, "input-dims: {}", join_usizes(m.input_dims()));
            let _ = writeln!(out, "output-dims: {}", join_usizes(m.output_dims()));
            for (k, c) in m.cores().iter().enumerate() {
                tensor_block(&mut out, &format!("core{k}"), c);
            }
            let _ = writeln!(out, "block bias");
            out.push_str(&vector_to_string(m.bias()));
        }
        ModelFile::CpRegression(m) => {
            let dims: Vec<usize> = m.factors.iter().map(Matrix::rows).collect();
            let _ = writeln!(out, "shape: {}", join_usizes(&dims));
            let _ = writeln!(out, "ranks: {}", m.factors[0].cols());
            let _ = writeln!(out, "covariate-weights: {}", join_floats(&m.covariate_weights));
            let _ = writeln!(out, "residual-scale: {}", format_g17(m.residual_scale));
            for (k, f) in m.factors.iter().enumerate() {
                matrix_block(&mut out, &format!("factor{k}"), f);
            }
        }
        ModelFile::TuckerRegression(m) => {
            let dims: Vec<usize> = m.factors.iter().map(Matrix::rows).collect();
            let ranks: Vec<usize> = m.factors.iter().map(Matrix::cols).collect();
            let _ = writeln!(out, "shape: {}", join_usizes(&dims));
            let _ = writeln!(out, "ranks: {}", join_usizes(&ranks));
            let _ = writeln!(out, "covariate-weights: {}", join_floats(&m.covariate_weights));
            let _ = writeln!(out, "residual-scale: {}", format_g17(m.residual_scale));
            tensor_block(&mut out, "core", &m.core);
            for (k, f) in m.factors.iter().enumerate() {
                matrix_block(&mut out, &format!("factor{k}"), f);
            }
        }
    }
    out
}

struct RawContainer<'a> {
    kind: &'a str,
    kind_line: usize,
    headers: BTreeMap<&'a str, (usize, &'a str)>,
    blocks: Vec<(&'a str, Vec<(usize, &'a str)>)>,
}

fn split_container<'a>(src: &'a str, origin: &str) -> Result<RawContainer<'a>> {
    let mut lines = content_lines(src).peekable();
    let (kind_line, first) = lines
        .next()
        .ok_or_else(|| Error::parse(origin, 0, "empty model file"))?;
    let kind = first
        .strip_prefix("kind:")
        .ok_or_else(|| Error::parse(origin, kind_line, "expected a `kind:` line"))?
        .trim();

    let mut headers = BTreeMap::new();
    let mut blocks: Vec<(&str, Vec<(usize, &str)>)> = Vec::new();
    for (no, line) in lines {
        if let Some(name) = line.strip_prefix("block ") {
            blocks.push((name.trim(), Vec::new()));
        } else if let Some((_, body)) = blocks.last_mut() {
            body.push((no, line));
        } else {
            let (key, value) = line
                .split_once(':')
                .ok_or_else(|| Error::parse(origin, no, "expected `key: value`"))?;
            if headers.insert(key.trim(), (no, value.trim())).is_some() {
                return Err(Error::parse(origin, no, format!("repeated header `{key}`")));
            }
        }
    }
    Ok(RawContainer {
        kind,
        kind_line,
        headers,
        blocks,
    })
}

impl<'a> RawContainer<'a> {
    fn header(&self, key: &str, origin: &str) -> Result<(usize, &'a str)> {
        self.headers
            .get(key)
            .copied()
            .ok_or_else(|| Error::parse(origin, self.kind_line, format!("missing `{key}:` header")))
    }

    fn usizes_header(&self, key: &str, origin: &str) -> Result<Vec<usize>> {
        let (no, text) = self.header(key, origin)?;
        parse_usizes(text).map_err(|m| Error::parse(origin, no, m))
    }

    fn floats_header(&self, key: &str, origin: &str) -> Result<Vec<f64>> {
        let (no, text) = self.header(key, origin)?;
        if text.is_empty() {
            return Ok(Vec::new());
        }
        text.split(',')
            .map(str::trim)
            .map(|f| {
                f.parse::<f64>()
                    .map_err(|_| Error::parse(origin, no, format!("bad value `{f}`")))
            })
            .collect()
    }

    /// The blocks, in file order, checked against the exact expected names.
    fn take_blocks(&self, expected: &[String], origin: &str) -> Result<Vec<DenseTensor>> {
        let got: Vec<&str> = self.blocks.iter().map(|(n, _)| *n).collect();
        if got != expected.iter().map(String::as_str).collect::<Vec<_>>() {
            return Err(Error::parse(
                origin,
                self.kind_line,
                format!("expected blocks {expected:?}, found {got:?}"),
            ));
        }
        self.blocks
            .iter()
            .map(|(_, body)| {
                let sparse = parse_sparse_lines(body.iter().copied(), origin)?;
                sparse.to_dense(crate::tensor::densify_budget())
            })
            .collect()
    }
}

fn factor_names(n: usize) -> Vec<String> {
    (0..n).map(|k| format!("factor{k}")).collect()
}

fn as_factor(t: DenseTensor, rows: usize, cols: usize, name: &str, origin: &str, line: usize) -> Result<Matrix> {
    let m = t.to_matrix().map_err(|e| Error::parse(origin, line, e.to_string()))?;
    if m.rows() != rows || m.cols() != cols {
        return Err(Error::parse(
            origin,
            line,
            format!("{name} should be {rows}x{cols}, got {}x{}", m.rows(), m.cols()),
        ));
    }
    Ok(m)
}

pub fn parse_model(src: &str, origin: &str) -> Result<ModelFile> {
    let raw = split_container(src, origin)?;
    let line = raw.kind_line;
    let reframe = |e: Error| match e {
        e @ Error::Parse { .. } => e,
        e => Error::parse(origin, line, e.to_string()),
    };
    let dims = raw.usizes_header("shape", origin)?;
    let n = dims.len();
    match raw.kind {
        "cp" => {
            let ranks = raw.usizes_header("ranks", origin)?;
            if ranks.len() != 1 {
                return Err(Error::parse(origin, line, "cp needs a single rank"));
            }
            let weights = raw.floats_header("weights", origin)?;
            let blocks = raw.take_blocks(&factor_names(n), origin)?;
            let factors = blocks
                .into_iter()
                .enumerate()
                .map(|(k, t)| as_factor(t, dims[k], ranks[0], &format!("factor{k}"), origin, line))
                .collect::<Result<Vec<_>>>()?;
            Ok(ModelFile::Cp(CpModel::new(weights, factors).map_err(reframe)?))
        }
        "tucker" => {
            let ranks = raw.usizes_header("ranks", origin)?;
            let mut names = vec!["core".to_string()];
            names.extend(factor_names(n));
            let mut blocks = raw.take_blocks(&names, origin)?.into_iter();
            let core = blocks.next().expect("core block");
            let factors = blocks
                .enumerate()
                .map(|(k, t)| as_factor(t, dims[k], ranks[k], &format!("factor{k}"), origin, line))
                .collect::<Result<Vec<_>>>()?;
            Ok(ModelFile::Tucker(TuckerModel::new(core, factors).map_err(reframe)?))
        }
        "tt" => {
            let ranks = raw.usizes_header("ranks", origin)?;
            let names: Vec<String> = (0..n).map(|k| format!("core{k}")).collect();
            let cores = raw.take_blocks(&names, origin)?;
            let model = TtModel::new(cores).map_err(reframe)?;
            if model.dims() != dims || model.ranks() != ranks {
                return Err(Error::parse(origin, line, "headers disagree with the stored cores"));
            }
            Ok(ModelFile::Tt(model))
        }
        "tt-layer" => {
            let ranks = raw.usizes_header("ranks", origin)?;
            let m_dims = raw.usizes_header("input-dims", origin)?;
            let n_dims = raw.usizes_header("output-dims", origin)?;
            let mut names: Vec<String> = (0..n).map(|k| format!("core{k}")).collect();
            names.push("bias".to_string());
            let mut blocks = raw.take_blocks(&names, origin)?;
            let bias_tensor = blocks.pop().expect("bias block");
            if bias_tensor.order() != 1 {
                return Err(Error::parse(origin, line, "bias must be a 1-way tensor"));
            }
            let layer = TtLayer::from_cores(&m_dims, &n_dims, blocks, bias_tensor.into_data())
                .map_err(reframe)?;
            let paired: Vec<usize> = n_dims.iter().zip(&m_dims).map(|(a, b)| a * b).collect();
            if paired != dims || layer.ranks() != ranks {
                return Err(Error::parse(origin, line, "headers disagree with the stored cores"));
            }
            Ok(ModelFile::TtLayer(layer))
        }
        "cp-regression" => {
            let ranks = raw.usizes_header("ranks", origin)?;
            if ranks.len() != 1 {
                return Err(Error::parse(origin, line, "cp-regression needs a single rank"));
            }
            let covariate_weights = raw.floats_header("covariate-weights", origin)?;
            let residual = raw.floats_header("residual-scale", origin)?;
            if residual.len() != 1 {
                return Err(Error::parse(origin, line, "residual-scale must be one value"));
            }
            let blocks = raw.take_blocks(&factor_names(n), origin)?;
            let factors = blocks
                .into_iter()
                .enumerate()
                .map(|(k, t)| as_factor(t, dims[k], ranks[0], &format!("factor{k}"), origin, line))
                .collect::<Result<Vec<_>>>()?;
            if factors.is_empty() {
                return Err(Error::parse(origin, line, "cp-regression needs factors"));
            }
            Ok(ModelFile::CpRegression(CpRegression {
                factors,
                covariate_weights,
                residual_scale: residual[0],
            }))
        }
        "tucker-regression" => {
            let ranks = raw.usizes_header("ranks", origin)?;
            let covariate_weights = raw.floats_header("covariate-weights", origin)?;
            let residual = raw.floats_header("residual-scale", origin)?;
            if residual.len() != 1 {
                return Err(Error::parse(origin, line, "residual-scale must be one value"));
            }
            let mut names = vec!["core".to_string()];
            names.extend(factor_names(n));
            let mut blocks = raw.take_blocks(&names, origin)?.into_iter();
            let core = blocks.next().expect("core block");
            if core.shape().dims() != ranks {
                return Err(Error::parse(origin, line, "core shape must equal the ranks"));
            }
            let factors = blocks
                .enumerate()
                .map(|(k, t)| as_factor(t, dims[k], ranks[k], &format!("factor{k}"), origin, line))
                .collect::<Result<Vec<_>>>()?;
            Ok(ModelFile::TuckerRegression(TuckerRegression {
                core,
                factors,
                covariate_weights,
                residual_scale: residual[0],
            }))
        }
        other => Err(Error::parse(
            origin,
            line,
            format!("unknown model kind `{other}`"),
        )),
    }
}

pub fn read_model(path: &Path) -> Result<ModelFile> {
    let src = std::fs::read_to_string(path)?;
    parse_model(&src, &path.display().to_string())
}

pub fn write_model(path: &Path, model: &ModelFile) -> Result<()> {
    super::write_atomic(path, &model_to_string(model))
}
