use crate::decomp::FitReport;
use crate::error::{Error, Result};
use crate::linalg::truncated_svd;
use crate::tensor::{DenseTensor, Matrix};

/// Tucker model: a core tensor multiplied along each mode by a factor matrix
/// with orthonormal columns.
#[derive(Debug, Clone)]
pub struct TuckerModel {
    core: DenseTensor,
    factors: Vec<Matrix>,
}

impl TuckerModel {
    pub fn new(core: DenseTensor, factors: Vec<Matrix>) -> Result<Self> {
        if factors.len() != core.order() {
            return Err(Error::invalid(format!(
                "core has {} modes but {} factors were given",
                core.order(),
                factors.len()
            )));
        }
        for (n, f) in factors.iter().enumerate() {
            if f.cols() != core.shape().dim(n) {
                return Err(Error::ShapeMismatch {
                    expected: format!("factor {n} with {} columns", core.shape().dim(n)),
                    got: format!("{}x{}", f.rows(), f.cols()),
                });
            }
        }
        Ok(TuckerModel { core, factors })
    }

    pub fn core(&self) -> &DenseTensor {
        &self.core
    }

    pub fn factors(&self) -> &[Matrix] {
        &self.factors
    }

    pub fn ranks(&self) -> Vec<usize> {
        self.core.shape().dims().to_vec()
    }

    pub fn dims(&self) -> Vec<usize> {
        self.factors.iter().map(|f| f.rows()).collect()
    }

    pub fn reconstruct(&self) -> Result<DenseTensor> {
        tucker_reconstruct(self)
    }
}

#[derive(Debug, Clone)]
pub struct TuckerOptions {
    pub max_iters: usize,
    /// Stop once the per-sweep decrease of the relative error falls below
    /// this value.
    pub tol: f64,
}

impl Default for TuckerOptions {
    fn default() -> Self {
        TuckerOptions {
            max_iters: 50,
            tol: 1e-8,
        }
    }
}

fn check_ranks(t: &DenseTensor, ranks: &[usize]) -> Result<()> {
    if ranks.len() != t.order() {
        return Err(Error::invalid(format!(
            "{} ranks given for an order-{} tensor",
            ranks.len(),
            t.order()
        )));
    }
    for (n, (&r, &d)) in ranks.iter().zip(t.shape().dims()).enumerate() {
        if r == 0 || r > d {
            return Err(Error::invalid(format!(
                "rank {r} for mode {n} is not in 1..={d}"
            )));
        }
    }
    Ok(())
}

/// Projects the tensor onto every factor's column space, giving the core.
fn project_core(t: &DenseTensor, factors: &[Matrix]) -> Result<DenseTensor> {
    let mut g = t.clone();
    for (n, f) in factors.iter().enumerate() {
        g = g.mode_n_product(&f.transpose(), n)?;
    }
    Ok(g)
}

/// Higher-order SVD: factor n holds the leading left singular vectors of the
/// mode-n unfolding, and the core is the projection onto them.
pub fn hosvd(t: &DenseTensor, ranks: &[usize]) -> Result<TuckerModel> {
    check_ranks(t, ranks)?;
    let mut factors = Vec::with_capacity(t.order());
    for (n, &r) in ranks.iter().enumerate() {
        factors.push(truncated_svd(&t.unfold(n)?, r)?.u);
    }
    let core = project_core(t, &factors)?;
    TuckerModel::new(core, factors)
}

/// Higher-order orthogonal iteration, initialized from the HOSVD. Each sweep
/// re-solves every factor against the others; for orthonormal factors the
/// fit error satisfies `err^2 = 1 - ||core||^2 / ||t||^2`, which is how the
/// per-sweep trace is computed.
pub fn hooi(
    t: &DenseTensor,
    ranks: &[usize],
    opts: &TuckerOptions,
) -> Result<(TuckerModel, FitReport)> {
    check_ranks(t, ranks)?;
    let norm = t.frobenius_norm();
    if norm == 0.0 {
        return Err(Error::invalid("cannot fit a Tucker model to a zero tensor"));
    }
    let init = hosvd(t, ranks)?;
    let mut factors = init.factors;

    let rel_err = |core: &DenseTensor| -> f64 {
        let c = core.frobenius_norm();
        ((norm * norm - c * c).max(0.0)).sqrt() / norm
    };

    let mut errors = vec![rel_err(&init.core)];
    let mut converged = false;
    for _ in 0..opts.max_iters {
        for n in 0..t.order() {
            let mut partial = t.clone();
            for (k, f) in factors.iter().enumerate() {
                if k != n {
                    partial = partial.mode_n_product(&f.transpose(), k)?;
                }
            }
            factors[n] = truncated_svd(&partial.unfold(n)?, ranks[n])?.u;
        }
        let core = project_core(t, &factors)?;
        let err = rel_err(&core);
        let prev = *errors.last().unwrap();
        errors.push(err);
        if prev - err < opts.tol {
            converged = true;
            break;
        }
    }

    let core = project_core(t, &factors)?;
    let report = FitReport {
        iterations: errors.len() - 1,
        converged,
        errors,
        step_truncation: Vec::new(),
    };
    Ok((TuckerModel::new(core, factors)?, report))
}

/// Dense tensor described by a Tucker model.
pub fn tucker_reconstruct(model: &TuckerModel) -> Result<DenseTensor> {
    let mut t = model.core.clone();
    for (n, f) in model.factors.iter().enumerate() {
        t = t.mode_n_product(f, n)?;
    }
    Ok(t)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::decomp::relative_error;
    use crate::linalg::svd;
    use crate::tensor::Shape;

    fn test_tensor() -> DenseTensor {
        DenseTensor::from_fn(Shape::new(vec![5, 4, 3]).unwrap(), |idx| {
            let (i, j, k) = (idx[0] as f64, idx[1] as f64, idx[2] as f64);
            (i + 1.0) * (j - 1.5) + (k + 0.5) * (i - 2.0) + 0.1 * i * j * k
        })
        .unwrap()
    }

    #[test]
    fn full_rank_hosvd_is_exact() {
        let t = test_tensor();
        let model = hosvd(&t, &[5, 4, 3]).unwrap();
        let back = model.reconstruct().unwrap();
        assert!(relative_error(&t, &back).unwrap() < 1e-12);
    }

    #[test]
    fn factors_are_orthonormal() {
        let t = test_tensor();
        let model = hosvd(&t, &[2, 2, 2]).unwrap();
        for f in model.factors() {
            let g = f.gram();
            for i in 0..g.rows() {
                for j in 0..g.cols() {
                    let expected = if i == j { 1.0 } else { 0.0 };
                    assert!((g[(i, j)] - expected).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn hosvd_error_within_tail_bound() {
        let t = test_tensor();
        let ranks = [2, 2, 2];
        let model = hosvd(&t, &ranks).unwrap();
        let err = relative_error(&t, &model.reconstruct().unwrap()).unwrap();
        let mut tail2 = 0.0;
        for (n, &r) in ranks.iter().enumerate() {
            let s = svd(&t.unfold(n).unwrap()).unwrap();
            tail2 += s.sigma[r..].iter().map(|x| x * x).sum::<f64>();
        }
        let bound = tail2.sqrt() / t.frobenius_norm();
        assert!(err <= bound + 1e-12, "err {err} exceeds bound {bound}");
    }

    #[test]
    fn hooi_no_worse_than_hosvd_and_monotone() {
        let t = test_tensor();
        let (model, report) = hooi(&t, &[2, 2, 2], &TuckerOptions::default()).unwrap();
        for w in report.errors.windows(2) {
            assert!(w[1] <= w[0] + 1e-12);
        }
        let hosvd_err = report.errors[0];
        let final_err = relative_error(&t, &model.reconstruct().unwrap()).unwrap();
        assert!(final_err <= hosvd_err + 1e-12);
        // The energy identity used for the trace matches the direct error.
        assert!((final_err - report.final_error()).abs() < 1e-10);
    }

    #[test]
    fn core_energy_equals_tensor_energy_at_full_rank() {
        let t = test_tensor();
        let model = hosvd(&t, &[5, 4, 3]).unwrap();
        assert!(
            (model.core().frobenius_norm() - t.frobenius_norm()).abs()
                < 1e-10 * t.frobenius_norm()
        );
    }

    #[test]
    fn invalid_ranks_are_rejected() {
        let t = test_tensor();
        assert!(hosvd(&t, &[6, 4, 3]).is_err());
        assert!(hosvd(&t, &[5, 4]).is_err());
        assert!(hosvd(&t, &[0, 4, 3]).is_err());
    }
}
