//! Self-contained dense linear algebra kernels: thin SVD by one-sided Jacobi
//! rotations, symmetric eigendecomposition by cyclic Jacobi, pseudoinverse
//! and ridge solves built on them, and PCA on row-sample matrices.
//!
//! Conventions used throughout:
//! - singular values and eigenvalues are returned in descending order;
//! - singular values below `max(m, n) * sigma_max * 1e-12` are treated as
//!   zero by the pseudoinverse and the minimum-norm solve;
//! - each singular/eigen vector is oriented so its largest-magnitude entry
//!   is nonnegative, which pins an otherwise arbitrary sign.

use crate::error::{Error, Result};
use crate::tensor::Matrix;

/// Relative threshold under which a singular value counts as zero.
pub const RANK_CUTOFF_FACTOR: f64 = 1e-12;

const JACOBI_TOL: f64 = 1e-14;
const MAX_SWEEPS: usize = 100;

/// Thin singular value decomposition `a = u * diag(sigma) * v^T` with
/// `k = min(rows, cols)` columns in `u` and `v`.
#[derive(Debug, Clone)]
pub struct Svd {
    pub u: Matrix,
    pub sigma: Vec<f64>,
    pub v: Matrix,
}

impl Svd {
    /// Number of singular values above the rank cutoff.
    pub fn rank(&self) -> usize {
        let cutoff = self.cutoff(self.u.rows().max(self.v.rows()));
        self.sigma.iter().filter(|&&s| s > cutoff).count()
    }

    fn cutoff(&self, max_dim: usize) -> f64 {
        let sigma_max = self.sigma.first().copied().unwrap_or(0.0);
        max_dim as f64 * sigma_max * RANK_CUTOFF_FACTOR
    }
}

/// Thin SVD via one-sided Jacobi: columns of a working copy are rotated in
/// pairs until mutually orthogonal, which makes them `u_j * sigma_j`.
pub fn svd(a: &Matrix) -> Result<Svd> {
    if a.rows() == 0 || a.cols() == 0 {
        return Err(Error::invalid("svd of an empty matrix"));
    }
    if a.rows() < a.cols() {
        let t = svd(&a.transpose())?;
        return Ok(Svd {
            u: t.v,
            sigma: t.sigma,
            v: t.u,
        });
    }

    let m = a.rows();
    let n = a.cols();
    // Column-major working copy: rotations touch whole columns.
    let mut w: Vec<Vec<f64>> = (0..n).map(|j| a.col(j)).collect();
    let mut v: Vec<Vec<f64>> = (0..n)
        .map(|j| {
            let mut e = vec![0.0; n];
            e[j] = 1.0;
            e
        })
        .collect();

    // The squared Frobenius norm is invariant under the rotations. A column
    // whose squared norm sinks below the noise floor is deflated to exact
    // zero: on rank-deficient inputs such columns carry pure rounding noise,
    // and the relative orthogonality test would chase their direction
    // forever.
    let fro2: f64 = w.iter().flatten().map(|&x| x * x).sum();
    let floor = fro2 * (f64::EPSILON * f64::EPSILON);

    let mut converged = false;
    for _ in 0..MAX_SWEEPS {
        let mut off_max = 0.0f64;
        for p in 0..n {
            for q in (p + 1)..n {
                let mut alpha = 0.0;
                let mut beta = 0.0;
                let mut gamma = 0.0;
                for i in 0..m {
                    alpha += w[p][i] * w[p][i];
                    beta += w[q][i] * w[q][i];
                    gamma += w[p][i] * w[q][i];
                }
                if alpha <= floor {
                    w[p].fill(0.0);
                    continue;
                }
                if beta <= floor {
                    w[q].fill(0.0);
                    continue;
                }
                let off = gamma.abs() / (alpha * beta).sqrt();
                off_max = off_max.max(off);
                if off <= JACOBI_TOL {
                    continue;
                }
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                for i in 0..m {
                    let wp = w[p][i];
                    let wq = w[q][i];
                    w[p][i] = c * wp - s * wq;
                    w[q][i] = s * wp + c * wq;
                }
                for i in 0..n {
                    let vp = v[p][i];
                    let vq = v[q][i];
                    v[p][i] = c * vp - s * vq;
                    v[q][i] = s * vp + c * vq;
                }
            }
        }
        if off_max <= JACOBI_TOL {
            converged = true;
            break;
        }
    }
    if !converged {
        return Err(Error::invalid("svd did not converge"));
    }

    let mut order: Vec<usize> = (0..n).collect();
    let norms: Vec<f64> = w
        .iter()
        .map(|col| col.iter().map(|&x| x * x).sum::<f64>().sqrt())
        .collect();
    order.sort_by(|&i, &j| norms[j].partial_cmp(&norms[i]).unwrap());

    let mut u_mat = Matrix::zeros(m, n);
    let mut v_mat = Matrix::zeros(n, n);
    let mut sigma = vec![0.0; n];
    for (dst, &src) in order.iter().enumerate() {
        sigma[dst] = norms[src];
        if norms[src] > 0.0 {
            let inv = 1.0 / norms[src];
            for i in 0..m {
                u_mat[(i, dst)] = w[src][i] * inv;
            }
        }
        for i in 0..n {
            v_mat[(i, dst)] = v[src][i];
        }
    }
    fix_column_signs(&mut u_mat, Some(&mut v_mat));
    Ok(Svd {
        u: u_mat,
        sigma,
        v: v_mat,
    })
}

/// Thin SVD truncated to the k largest singular values.
pub fn truncated_svd(a: &Matrix, k: usize) -> Result<Svd> {
    let max_k = a.rows().min(a.cols());
    if k == 0 || k > max_k {
        return Err(Error::invalid(format!(
            "truncation rank {k} not in 1..={max_k} for a {}x{} matrix",
            a.rows(),
            a.cols()
        )));
    }
    let full = svd(a)?;
    let mut u = Matrix::zeros(a.rows(), k);
    let mut v = Matrix::zeros(a.cols(), k);
    for j in 0..k {
        for i in 0..a.rows() {
            u[(i, j)] = full.u[(i, j)];
        }
        for i in 0..a.cols() {
            v[(i, j)] = full.v[(i, j)];
        }
    }
    Ok(Svd {
        u,
        sigma: full.sigma[..k].to_vec(),
        v,
    })
}

/// Symmetric eigendecomposition `a = vectors * diag(values) * vectors^T`,
/// eigenvalues descending.
#[derive(Debug, Clone)]
pub struct Eigh {
    pub values: Vec<f64>,
    pub vectors: Matrix,
}

/// Cyclic Jacobi eigendecomposition of a symmetric matrix.
pub fn eigh(a: &Matrix) -> Result<Eigh> {
    if a.rows() != a.cols() {
        return Err(Error::invalid(format!(
            "eigh needs a square matrix, got {}x{}",
            a.rows(),
            a.cols()
        )));
    }
    let n = a.rows();
    let norm = a.frobenius_norm();
    let mut work = a.clone();
    let mut vecs = Matrix::identity(n);

    if norm > 0.0 {
        let mut converged = false;
        for _ in 0..MAX_SWEEPS {
            let mut off = 0.0;
            for p in 0..n {
                for q in (p + 1)..n {
                    off += work[(p, q)] * work[(p, q)];
                }
            }
            if (2.0 * off).sqrt() <= JACOBI_TOL * norm {
                converged = true;
                break;
            }
            for p in 0..n {
                for q in (p + 1)..n {
                    let apq = work[(p, q)];
                    if apq.abs() <= JACOBI_TOL * norm * 1e-2 {
                        continue;
                    }
                    let tau = (work[(q, q)] - work[(p, p)]) / (2.0 * apq);
                    let t = tau.signum() / (tau.abs() + (1.0 + tau * tau).sqrt());
                    let c = 1.0 / (1.0 + t * t).sqrt();
                    let s = c * t;
                    let app = work[(p, p)];
                    let aqq = work[(q, q)];
                    work[(p, p)] = app - t * apq;
                    work[(q, q)] = aqq + t * apq;
                    work[(p, q)] = 0.0;
                    work[(q, p)] = 0.0;
                    for k in 0..n {
                        if k == p || k == q {
                            continue;
                        }
                        let akp = work[(k, p)];
                        let akq = work[(k, q)];
                        work[(k, p)] = c * akp - s * akq;
                        work[(p, k)] = work[(k, p)];
                        work[(k, q)] = s * akp + c * akq;
                        work[(q, k)] = work[(k, q)];
                    }
                    for k in 0..n {
                        let vkp = vecs[(k, p)];
                        let vkq = vecs[(k, q)];
                        vecs[(k, p)] = c * vkp - s * vkq;
                        vecs[(k, q)] = s * vkp + c * vkq;
                    }
                }
            }
        }
        if !converged {
            return Err(Error::invalid("eigh did not converge"));
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| work[(j, j)].partial_cmp(&work[(i, i)]).unwrap());
    let mut values = vec![0.0; n];
    let mut vectors = Matrix::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        values[dst] = work[(src, src)];
        for i in 0..n {
            vectors[(i, dst)] = vecs[(i, src)];
        }
    }
    fix_column_signs(&mut vectors, None);
    Ok(Eigh { values, vectors })
}

/// Flips columns so the largest-magnitude entry of each is nonnegative. The
/// paired matrix, when given, has the same columns flipped to keep products
/// unchanged.
fn fix_column_signs(m: &mut Matrix, mut paired: Option<&mut Matrix>) {
    for j in 0..m.cols() {
        let mut best = 0usize;
        let mut best_abs = 0.0f64;
        for i in 0..m.rows() {
            let a = m[(i, j)].abs();
            if a > best_abs {
                best_abs = a;
                best = i;
            }
        }
        if best_abs > 0.0 && m[(best, j)] < 0.0 {
            for i in 0..m.rows() {
                m[(i, j)] = -m[(i, j)];
            }
            if let Some(p) = paired.as_deref_mut() {
                for i in 0..p.rows() {
                    p[(i, j)] = -p[(i, j)];
                }
            }
        }
    }
}

/// Moore-Penrose pseudoinverse with the shared rank cutoff.
pub fn pinv(a: &Matrix) -> Result<Matrix> {
    let d = svd(a)?;
    let cutoff = d.cutoff(a.rows().max(a.cols()));
    let k = d.sigma.len();
    let mut scaled_v = Matrix::zeros(a.cols(), k);
    for j in 0..k {
        if d.sigma[j] > cutoff {
            let inv = 1.0 / d.sigma[j];
            for i in 0..a.cols() {
                scaled_v[(i, j)] = d.v[(i, j)] * inv;
            }
        }
    }
    scaled_v.matmul(&d.u.transpose())
}

/// Pseudoinverse of a symmetric positive semidefinite matrix, with an
/// optional ridge added to the eigenvalues.
pub fn pinv_sym(a: &Matrix, ridge: f64) -> Result<Matrix> {
    let e = eigh(a)?;
    let n = a.rows();
    let lambda_max = e.values.first().copied().unwrap_or(0.0).max(0.0);
    let cutoff = n as f64 * lambda_max * RANK_CUTOFF_FACTOR;
    let mut scaled = Matrix::zeros(n, n);
    for j in 0..n {
        let lam = e.values[j] + ridge;
        if e.values[j] > cutoff && lam > 0.0 {
            let inv = 1.0 / lam;
            for i in 0..n {
                scaled[(i, j)] = e.vectors[(i, j)] * inv;
            }
        }
    }
    scaled.matmul(&e.vectors.transpose())
}

/// Ridge-regularized least squares `min ||a x - b||^2 + lambda ||x||^2`.
/// With `lambda = 0` this is the minimum-norm least-squares solution.
pub fn solve_ridge(a: &Matrix, b: &[f64], lambda: f64) -> Result<Vec<f64>> {
    if b.len() != a.rows() {
        return Err(Error::ShapeMismatch {
            expected: format!("right-hand side of length {}", a.rows()),
            got: format!("length {}", b.len()),
        });
    }
    if lambda < 0.0 {
        return Err(Error::invalid("ridge parameter must be nonnegative"));
    }
    let d = svd(a)?;
    let cutoff = d.cutoff(a.rows().max(a.cols()));
    let mut x = vec![0.0; a.cols()];
    for (j, &s) in d.sigma.iter().enumerate() {
        if s <= cutoff {
            continue;
        }
        let mut ub = 0.0;
        for i in 0..a.rows() {
            ub += d.u[(i, j)] * b[i];
        }
        let f = if lambda == 0.0 {
            1.0 / s
        } else {
            s / (s * s + lambda)
        };
        for i in 0..a.cols() {
            x[i] += d.v[(i, j)] * f * ub;
        }
    }
    Ok(x)
}

/// Inverse square root of a symmetric positive definite matrix.
pub fn sym_inv_sqrt(a: &Matrix) -> Result<Matrix> {
    let e = eigh(a)?;
    let n = a.rows();
    let lambda_max = e.values.first().copied().unwrap_or(0.0);
    if lambda_max <= 0.0 {
        return Err(Error::invalid(
            "matrix is not positive definite in sym_inv_sqrt",
        ));
    }
    let cutoff = n as f64 * lambda_max * RANK_CUTOFF_FACTOR;
    let mut scaled = Matrix::zeros(n, n);
    for j in 0..n {
        if e.values[j] <= cutoff {
            return Err(Error::invalid(
                "matrix is numerically singular in sym_inv_sqrt",
            ));
        }
        let inv = 1.0 / e.values[j].sqrt();
        for i in 0..n {
            scaled[(i, j)] = e.vectors[(i, j)] * inv;
        }
    }
    scaled.matmul(&e.vectors.transpose())
}

/// Principal component analysis of row samples.
#[derive(Debug, Clone)]
pub struct Pca {
    /// Column means subtracted before the eigendecomposition.
    pub mean: Vec<f64>,
    /// d x k matrix whose columns are the leading principal directions.
    pub components: Matrix,
    /// Leading eigenvalues of the centered scatter matrix, descending.
    pub eigenvalues: Vec<f64>,
    /// m x k projections of the centered rows onto the components.
    pub scores: Matrix,
}

/// PCA of an m x d matrix of row samples: eigendecomposition of the centered
/// scatter matrix, keeping the k leading components.
pub fn pca(x: &Matrix, k: usize) -> Result<Pca> {
    let m = x.rows();
    let d = x.cols();
    if k == 0 || k > d {
        return Err(Error::invalid(format!(
            "component count {k} not in 1..={d}"
        )));
    }
    let mut mean = vec![0.0; d];
    for i in 0..m {
        for (j, mu) in mean.iter_mut().enumerate() {
            *mu += x[(i, j)];
        }
    }
    for mu in &mut mean {
        *mu /= m as f64;
    }
    let centered = Matrix::from_fn(m, d, |i, j| x[(i, j)] - mean[j]);
    let scatter = centered.gram();
    let e = eigh(&scatter)?;
    let mut components = Matrix::zeros(d, k);
    for j in 0..k {
        for i in 0..d {
            components[(i, j)] = e.vectors[(i, j)];
        }
    }
    let eigenvalues = e.values[..k].iter().map(|&v| v.max(0.0)).collect();
    let scores = centered.matmul(&components)?;
    Ok(Pca {
        mean,
        components,
        eigenvalues,
        scores,
    })
}
