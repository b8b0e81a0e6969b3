//! Tensor-train format for fully connected layers.
//!
//! A dense layer `y = Wx + b` with `W` of size `N x M` is rewritten as a
//! d-way tensor by factoring `M = m_1 * ... * m_d` and `N = n_1 * ... * n_d`
//! and pairing the k-th output digit with the k-th input digit on mode k.
//! The paired tensor is then factored with [`tt_svd`], so the layer stores
//! `d` small cores instead of the full weight matrix. The forward pass
//! contracts the cores against the reshaped input directly and never
//! materializes `W`.

use crate::decomp::{tt_svd, FitReport, TtModel, TtTruncation};
use crate::error::{Error, Result};
use crate::tensor::{DenseTensor, Matrix, Shape};

/// Fully connected layer whose weights live in tensor-train format.
///
/// Core `k` has shape `(r_{k-1}, n_k * m_k, r_k)` with the pair index laid
/// out as `i_k * m_k + j_k` (output digit first). Boundary ranks are 1. The
/// bias stays dense.
#[derive(Debug, Clone)]
pub struct TtLayer {
    m_dims: Vec<usize>,
    n_dims: Vec<usize>,
    tt: TtModel,
    bias: Vec<f64>,
}

impl TtLayer {
    /// Assembles a layer from explicit cores, validating every shape.
    pub fn from_cores(
        m_dims: &[usize],
        n_dims: &[usize],
        cores: Vec<DenseTensor>,
        bias: Vec<f64>,
    ) -> Result<Self> {
        check_factorizations(m_dims, n_dims)?;
        let tt = TtModel::new(cores)?;
        let paired: Vec<usize> = n_dims.iter().zip(m_dims).map(|(n, m)| n * m).collect();
        if tt.dims() != paired {
            return Err(Error::invalid(
                "core mode sizes must equal the paired products n_k * m_k",
            ));
        }
        let n_out: usize = n_dims.iter().product();
        if bias.len() != n_out {
            return Err(Error::ShapeMismatch {
                expected: format!("bias of length {n_out}"),
                got: format!("length {}", bias.len()),
            });
        }
        Ok(TtLayer {
            m_dims: m_dims.to_vec(),
            n_dims: n_dims.to_vec(),
            tt,
            bias,
        })
    }

    pub fn order(&self) -> usize {
        self.m_dims.len()
    }

    /// Input size `M`.
    pub fn input_size(&self) -> usize {
        self.m_dims.iter().product()
    }

    /// Output size `N`.
    pub fn output_size(&self) -> usize {
        self.n_dims.iter().product()
    }

    pub fn input_dims(&self) -> &[usize] {
        &self.m_dims
    }

    pub fn output_dims(&self) -> &[usize] {
        &self.n_dims
    }

    /// Rank chain `r_0..r_d` (boundaries are 1).
    pub fn ranks(&self) -> Vec<usize> {
        self.tt.ranks()
    }

    pub fn cores(&self) -> &[DenseTensor] {
        self.tt.cores()
    }

    pub fn bias(&self) -> &[f64] {
        &self.bias
    }

    /// Rebuilds the dense `N x M` weight matrix. Intended for diagnostics
    /// and small layers; the whole point of the format is not to need this.
    pub fn weight_matrix(&self) -> Result<Matrix> {
        let q = self.tt.reconstruct()?;
        let n_out = self.output_size();
        let m_in = self.input_size();
        let n_strides = row_major_strides(&self.n_dims);
        let m_strides = row_major_strides(&self.m_dims);
        let mut w = Matrix::zeros(n_out, m_in);
        let mut pair = vec![0usize; self.order()];
        for i in 0..n_out {
            for j in 0..m_in {
                for k in 0..self.order() {
                    let ik = i / n_strides[k] % self.n_dims[k];
                    let jk = j / m_strides[k] % self.m_dims[k];
                    pair[k] = ik * self.m_dims[k] + jk;
                }
                w[(i, j)] = q.get(&pair)?;
            }
        }
        Ok(w)
    }
}

/// Parameter tally for a [`TtLayer`] against its dense equivalent.
///
/// Weight counts exclude the bias; the total counts include it on both
/// sides. Ratios are dense over compressed, so larger means more savings.
#[derive(Debug, Clone, PartialEq)]
pub struct CompressionReport {
    pub dense_weight_params: u128,
    pub tt_weight_params: u128,
    pub dense_params: u128,
    pub tt_params: u128,
    pub weight_ratio: f64,
    pub ratio: f64,
}

fn check_factorizations(m_dims: &[usize], n_dims: &[usize]) -> Result<()> {
    if m_dims.is_empty() || m_dims.len() != n_dims.len() {
        return Err(Error::invalid(
            "input and output factorizations must be nonempty and equally long",
        ));
    }
    if m_dims.iter().chain(n_dims).any(|&d| d == 0) {
        return Err(Error::invalid("factorization entries must be positive"));
    }
    Ok(())
}

fn row_major_strides(dims: &[usize]) -> Vec<usize> {
    let mut s = vec![1usize; dims.len()];
    for k in (0..dims.len().saturating_sub(1)).rev() {
        s[k] = s[k + 1] * dims[k + 1];
    }
    s
}

/// Factors the weights of `y = Wx + b` into a tensor-train layer.
///
/// `w` must have `prod(n_dims)` rows and `prod(m_dims)` columns, and `bias`
/// one entry per row. With [`TtTruncation::Exact`] the layer reproduces `W`
/// to rounding error; rank caps or a tolerance trade accuracy for size. The
/// returned report carries the per-split truncation record.
pub fn matrix_to_tt_layer(
    w: &Matrix,
    bias: &[f64],
    m_dims: &[usize],
    n_dims: &[usize],
    trunc: &TtTruncation,
) -> Result<(TtLayer, FitReport)> {
    check_factorizations(m_dims, n_dims)?;
    let m_in: usize = m_dims.iter().product();
    let n_out: usize = n_dims.iter().product();
    if w.rows() != n_out || w.cols() != m_in {
        return Err(Error::ShapeMismatch {
            expected: format!("{n_out}x{m_in} weight matrix"),
            got: format!("{}x{}", w.rows(), w.cols()),
        });
    }
    if bias.len() != n_out {
        return Err(Error::ShapeMismatch {
            expected: format!("bias of length {n_out}"),
            got: format!("length {}", bias.len()),
        });
    }

    let paired: Vec<usize> = n_dims.iter().zip(m_dims).map(|(n, m)| n * m).collect();
    let n_strides = row_major_strides(n_dims);
    let m_strides = row_major_strides(m_dims);
    let q = DenseTensor::from_fn(Shape::new(paired)?, |pair| {
        let mut i = 0;
        let mut j = 0;
        for (k, &p) in pair.iter().enumerate() {
            i += p / m_dims[k] * n_strides[k];
            j += p % m_dims[k] * m_strides[k];
        }
        w[(i, j)]
    })?;
    let (tt, report) = tt_svd(&q, trunc)?;
    let layer = TtLayer::from_cores(m_dims, n_dims, tt.cores().to_vec(), bias.to_vec())?;
    Ok((layer, report))
}

/// Applies the layer to `x`, returning `Wx + b` without forming `W`.
///
/// The input is viewed as a tensor of shape `m_1 x ... x m_d` and the cores
/// are absorbed one mode at a time; the running buffer never exceeds
/// `prefix * r * suffix` scalars.
pub fn tt_layer_forward(layer: &TtLayer, x: &[f64]) -> Result<Vec<f64>> {
    let m_in = layer.input_size();
    if x.len() != m_in {
        return Err(Error::ShapeMismatch {
            expected: format!("input of length {m_in}"),
            got: format!("length {}", x.len()),
        });
    }

    let ranks = layer.ranks();
    let d = layer.order();
    let mut z = x.to_vec();
    let mut prefix = 1usize;
    let mut suffix: usize = layer.m_dims.iter().product();
    for k in 0..d {
        let (r_prev, r_next) = (ranks[k], ranks[k + 1]);
        let (mk, nk) = (layer.m_dims[k], layer.n_dims[k]);
        suffix /= mk;
        let core = &layer.cores()[k];
        let cd = core.data();
        // a[(i * r_next + a1, a0 * mk + j)] = core[(a0, i * mk + j, a1)]
        let a = Matrix::from_fn(nk * r_next, r_prev * mk, |row, col| {
            let (i, a1) = (row / r_next, row % r_next);
            let (a0, j) = (col / mk, col % mk);
            cd[(a0 * nk * mk + i * mk + j) * r_next + a1]
        });

        let in_rows = r_prev * mk;
        let out_rows = nk * r_next;
        let mut next = vec![0.0; prefix * out_rows * suffix];
        for p in 0..prefix {
            let block =
                Matrix::from_vec(in_rows, suffix, z[p * in_rows * suffix..][..in_rows * suffix].to_vec())?;
            let out = a.matmul(&block)?;
            next[p * out_rows * suffix..][..out_rows * suffix].copy_from_slice(out.data());
        }
        z = next;
        prefix *= nk;
    }

    for (zi, bi) in z.iter_mut().zip(&layer.bias) {
        *zi += bi;
    }
    Ok(z)
}

/// Counts stored parameters for `layer` and its dense equivalent.
pub fn compression_report(layer: &TtLayer) -> CompressionReport {
    let m = layer.input_size() as u128;
    let n = layer.output_size() as u128;
    let dense_weight = m * n;
    let tt_weight: u128 = layer.cores().iter().map(|c| c.len() as u128).sum();
    let dense = dense_weight + n;
    let tt = tt_weight + n;
    CompressionReport {
        dense_weight_params: dense_weight,
        tt_weight_params: tt_weight,
        dense_params: dense,
        tt_params: tt,
        weight_ratio: dense_weight as f64 / tt_weight as f64,
        ratio: dense as f64 / tt as f64,
    }
}
