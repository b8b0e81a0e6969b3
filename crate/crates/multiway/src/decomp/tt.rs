use crate::decomp::{relative_error, FitReport};
use crate::error::{Error, Result};
use crate::linalg::{svd, RANK_CUTOFF_FACTOR};
use crate::tensor::{DenseTensor, Matrix, Shape};

/// Tensor-train model: order-3 cores of shape (left rank, extent, right
/// rank) whose chained contraction reproduces the tensor. Boundary ranks
/// are 1.
#[derive(Debug, Clone)]
pub struct TtModel {
    cores: Vec<DenseTensor>,
}

impl TtModel {
    pub fn new(cores: Vec<DenseTensor>) -> Result<Self> {
        if cores.is_empty() {
            return Err(Error::invalid("a tensor train needs at least one core"));
        }
        let mut prev = 1usize;
        for (k, c) in cores.iter().enumerate() {
            if c.order() != 3 {
                return Err(Error::invalid(format!(
                    "core {k} must be 3-way, got order {}",
                    c.order()
                )));
            }
            if c.shape().dim(0) != prev {
                return Err(Error::invalid(format!(
                    "core {k} has left rank {} but the previous right rank is {prev}",
                    c.shape().dim(0)
                )));
            }
            prev = c.shape().dim(2);
        }
        if prev != 1 {
            return Err(Error::invalid(format!(
                "the final core must have right rank 1, got {prev}"
            )));
        }
        Ok(TtModel { cores })
    }

    pub fn cores(&self) -> &[DenseTensor] {
        &self.cores
    }

    pub fn order(&self) -> usize {
        self.cores.len()
    }

    pub fn dims(&self) -> Vec<usize> {
        self.cores.iter().map(|c| c.shape().dim(1)).collect()
    }

    /// All N+1 bond ranks, starting and ending at 1.
    pub fn ranks(&self) -> Vec<usize> {
        let mut r = vec![1usize];
        r.extend(self.cores.iter().map(|c| c.shape().dim(2)));
        r
    }

    pub fn reconstruct(&self) -> Result<DenseTensor> {
        tt_reconstruct(self)
    }
}

/// Rank selection rule for `tt_svd`.
#[derive(Debug, Clone)]
pub enum TtTruncation {
    /// Keep every singular value above the numerical-rank cutoff.
    Exact,
    /// Cap the k-th bond rank at `ranks[k]` (length N-1).
    MaxRanks(Vec<usize>),
    /// Keep ranks as small as possible while guaranteeing a relative
    /// reconstruction error of at most this tolerance. Each of the N-1
    /// truncation steps receives an equal share `tol * ||t|| / sqrt(N-1)`
    /// of the error budget.
    Tolerance(f64),
}

/// Sequential-SVD tensor-train factorization. The tensor is flattened one
/// mode at a time; each step keeps the leading left singular vectors as a
/// core and pushes the rest rightward. The report carries the discarded
/// singular mass of every step in `step_truncation`.
pub fn tt_svd(t: &DenseTensor, trunc: &TtTruncation) -> Result<(TtModel, FitReport)> {
    let dims = t.shape().dims().to_vec();
    let n_modes = dims.len();
    let norm = t.frobenius_norm();
    if let TtTruncation::MaxRanks(r) = trunc {
        if n_modes > 1 && r.len() != n_modes - 1 {
            return Err(Error::invalid(format!(
                "{} rank caps given for {} truncation steps",
                r.len(),
                n_modes - 1
            )));
        }
        if r.iter().any(|&x| x == 0) {
            return Err(Error::invalid("rank caps must be at least 1"));
        }
    }
    if let TtTruncation::Tolerance(tol) = trunc {
        if !(*tol >= 0.0) {
            return Err(Error::invalid("tolerance must be nonnegative"));
        }
    }

    if n_modes == 1 {
        let core = t.clone().reshape(Shape::new(vec![1, dims[0], 1])?)?;
        let model = TtModel::new(vec![core])?;
        let report = FitReport {
            errors: vec![0.0],
            iterations: 1,
            converged: true,
            step_truncation: Vec::new(),
        };
        return Ok((model, report));
    }

    let budget = match trunc {
        TtTruncation::Tolerance(tol) => tol * norm / ((n_modes - 1) as f64).sqrt(),
        _ => 0.0,
    };

    let mut cores = Vec::with_capacity(n_modes);
    let mut step_truncation = Vec::with_capacity(n_modes - 1);
    let mut c = Matrix::from_vec(dims[0], t.len() / dims[0], t.data().to_vec())?;
    let mut r_prev = 1usize;

    for k in 0..n_modes - 1 {
        let d = svd(&c)?;
        let cutoff =
            c.rows().max(c.cols()) as f64 * d.sigma.first().copied().unwrap_or(0.0)
                * RANK_CUTOFF_FACTOR;
        let numerical_rank = d.sigma.iter().filter(|&&s| s > cutoff).count().max(1);
        let r = match trunc {
            TtTruncation::Exact => numerical_rank,
            TtTruncation::MaxRanks(caps) => caps[k].min(numerical_rank),
            TtTruncation::Tolerance(_) => {
                let mut tail: Vec<f64> = vec![0.0; d.sigma.len() + 1];
                for j in (0..d.sigma.len()).rev() {
                    tail[j] = tail[j + 1] + d.sigma[j] * d.sigma[j];
                }
                let mut r = numerical_rank;
                while r < d.sigma.len() && tail[r].sqrt() > budget {
                    r += 1;
                }
                while r > 1 && tail[r - 1].sqrt() <= budget {
                    r -= 1;
                }
                r
            }
        };
        let discarded: f64 = d.sigma[r..].iter().map(|s| s * s).sum::<f64>().sqrt();
        step_truncation.push(discarded);

        let mut u_data = Vec::with_capacity(c.rows() * r);
        for i in 0..c.rows() {
            for j in 0..r {
                u_data.push(d.u[(i, j)]);
            }
        }
        cores.push(DenseTensor::from_data(
            Shape::new(vec![r_prev, dims[k], r])?,
            u_data,
        )?);

        // diag(sigma) * V^T, then reinterpret rows as (r, next extent).
        let rest_cols = c.cols();
        let mut b_data = vec![0.0; r * rest_cols];
        for (row, chunk) in b_data.chunks_mut(rest_cols).enumerate() {
            let s = d.sigma[row];
            if s == 0.0 {
                continue;
            }
            for (col, out) in chunk.iter_mut().enumerate() {
                *out = s * d.v[(col, row)];
            }
        }
        let next_dim = dims[k + 1];
        c = Matrix::from_vec(r * next_dim, rest_cols / next_dim, b_data)?;
        r_prev = r;
    }

    let last = DenseTensor::from_data(
        Shape::new(vec![r_prev, dims[n_modes - 1], 1])?,
        c.into_data(),
    )?;
    cores.push(last);

    let model = TtModel::new(cores)?;
    let err = if norm == 0.0 {
        0.0
    } else {
        relative_error(t, &model.reconstruct()?)?
    };
    let report = FitReport {
        errors: vec![err],
        iterations: 1,
        converged: true,
        step_truncation,
    };
    Ok((model, report))
}

/// Dense tensor described by a tensor train, contracted left to right.
pub fn tt_reconstruct(model: &TtModel) -> Result<DenseTensor> {
    let dims = model.dims();
    let first = &model.cores()[0];
    let mut acc = Matrix::from_vec(
        first.shape().dim(1),
        first.shape().dim(2),
        first.data().to_vec(),
    )?;
    for core in &model.cores()[1..] {
        let (rl, d, rr) = (
            core.shape().dim(0),
            core.shape().dim(1),
            core.shape().dim(2),
        );
        let core_mat = Matrix::from_vec(rl, d * rr, core.data().to_vec())?;
        let prod = acc.matmul(&core_mat)?;
        let rows = prod.rows() * d;
        acc = Matrix::from_vec(rows, rr, prod.into_data())?;
    }
    DenseTensor::from_data(Shape::new(dims)?, acc.into_data())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn random_tensor(dims: &[usize], seed: u64) -> DenseTensor {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        DenseTensor::from_fn(Shape::new(dims.to_vec()).unwrap(), |_| {
            rng.random::<f64>() - 0.5
        })
        .unwrap()
    }

    #[test]
    fn exact_roundtrip() {
        let t = random_tensor(&[3, 4, 5], 7);
        let (model, report) = tt_svd(&t, &TtTruncation::Exact).unwrap();
        let back = model.reconstruct().unwrap();
        assert!(relative_error(&t, &back).unwrap() < 1e-12);
        assert!(report.final_error() < 1e-12);
        assert_eq!(model.ranks().first(), Some(&1));
        assert_eq!(model.ranks().last(), Some(&1));
    }

    #[test]
    fn rank_one_tensor_has_unit_ranks() {
        let t = DenseTensor::outer_product(&[
            vec![1.0, -2.0, 0.5],
            vec![2.0, 1.0],
            vec![1.0, 3.0, -1.0, 0.25],
        ])
        .unwrap();
        let (model, _) = tt_svd(&t, &TtTruncation::Exact).unwrap();
        assert_eq!(model.ranks(), vec![1, 1, 1, 1]);
        assert!(relative_error(&t, &model.reconstruct().unwrap()).unwrap() < 1e-12);
    }

    #[test]
    fn interior_ranks_respect_unfolding_bounds() {
        let t = random_tensor(&[2, 3, 4, 2], 11);
        let (model, _) = tt_svd(&t, &TtTruncation::Exact).unwrap();
        let dims = [2usize, 3, 4, 2];
        let ranks = model.ranks();
        for k in 1..dims.len() {
            let left: usize = dims[..k].iter().product();
            let right: usize = dims[k..].iter().product();
            assert!(ranks[k] <= left.min(right));
        }
    }

    #[test]
    fn max_ranks_are_honored() {
        let t = random_tensor(&[4, 4, 4], 3);
        let (model, _) = tt_svd(&t, &TtTruncation::MaxRanks(vec![2, 3])).unwrap();
        let ranks = model.ranks();
        assert!(ranks[1] <= 2);
        assert!(ranks[2] <= 3);
    }

    #[test]
    fn tolerance_mode_meets_its_guarantee() {
        // Low-rank signal plus small noise: truncation should discard the
        // noise while staying within the requested tolerance.
        let signal = {
            let a = DenseTensor::outer_product(&[
                vec![1.0, 0.4, -0.2, 0.9, 0.1],
                vec![0.7, -0.3, 0.8, 0.2, 0.5, -0.6],
                vec![0.3, 0.9, -0.5, 0.1, 0.6, 0.2, -0.4],
            ])
            .unwrap();
            let b = DenseTensor::outer_product(&[
                vec![-0.2, 0.8, 0.3, -0.7, 0.6],
                vec![0.1, 0.5, -0.9, 0.4, -0.2, 0.3],
                vec![0.8, -0.1, 0.2, 0.7, -0.3, 0.5, 0.1],
            ])
            .unwrap();
            a.add(&b).unwrap()
        };
        let mut noisy = signal.clone();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for x in noisy.data_mut() {
            *x += 1e-5 * (rng.random::<f64>() - 0.5);
        }
        let tol = 1e-3;
        let (model, report) = tt_svd(&noisy, &TtTruncation::Tolerance(tol)).unwrap();
        assert!(report.final_error() <= tol);
        let budget = tol * noisy.frobenius_norm() / (2.0f64).sqrt();
        for &eps in &report.step_truncation {
            assert!(eps <= budget + 1e-15);
        }
        // The noise floor is far below the budget, so ranks collapse to 2.
        assert_eq!(model.ranks(), vec![1, 2, 2, 1]);
    }

    #[test]
    fn two_way_train_matches_matrix_rank() {
        let m = Matrix::from_fn(6, 5, |i, j| ((i + 2 * j) % 3) as f64 + (i as f64) * 0.5);
        let t = DenseTensor::from_matrix(&m);
        let (model, _) = tt_svd(&t, &TtTruncation::Exact).unwrap();
        let rank = svd(&m).unwrap().rank();
        assert_eq!(model.ranks()[1], rank);
    }

    #[test]
    fn error_matches_discarded_mass() {
        // With a single truncation step (2-way tensor), the reconstruction
        // error equals the discarded singular mass exactly.
        let t = random_tensor(&[6, 7], 13);
        let (_, report) = tt_svd(&t, &TtTruncation::MaxRanks(vec![3])).unwrap();
        let expected = report.step_truncation[0] / t.frobenius_norm();
        assert!((report.final_error() - expected).abs() < 1e-10);
    }
}
