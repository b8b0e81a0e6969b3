use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::decomp::FitReport;
use crate::error::{Error, Result};
use crate::linalg::{pinv_sym, truncated_svd};
use crate::tensor::{DenseTensor, Matrix, Shape};

/// CP (canonical polyadic) model: a weighted sum of rank-one tensors. Column
/// r of every factor matrix, scaled by `weights[r]`, gives component r.
#[derive(Debug, Clone)]
pub struct CpModel {
    weights: Vec<f64>,
    factors: Vec<Matrix>,
}

impl CpModel {
    pub fn new(weights: Vec<f64>, factors: Vec<Matrix>) -> Result<Self> {
        if factors.is_empty() {
            return Err(Error::invalid("a CP model needs at least one factor"));
        }
        let rank = weights.len();
        if rank == 0 {
            return Err(Error::invalid("a CP model needs at least one component"));
        }
        for f in &factors {
            if f.cols() != rank {
                return Err(Error::ShapeMismatch {
                    expected: format!("factor with {rank} columns"),
                    got: format!("{}x{}", f.rows(), f.cols()),
                });
            }
        }
        Ok(CpModel { weights, factors })
    }

    pub fn rank(&self) -> usize {
        self.weights.len()
    }

    pub fn order(&self) -> usize {
        self.factors.len()
    }

    pub fn dims(&self) -> Vec<usize> {
        self.factors.iter().map(|f| f.rows()).collect()
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn factors(&self) -> &[Matrix] {
        &self.factors
    }

    pub fn reconstruct(&self) -> Result<DenseTensor> {
        cp_reconstruct(self)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CpInit {
    /// Seeded standard normal entries.
    Random,
    /// Leading singular vectors of each unfolding, padded with random
    /// columns when the rank exceeds a mode extent.
    Hosvd,
}

#[derive(Debug, Clone)]
pub struct CpOptions {
    pub max_iters: usize,
    /// Stop once the per-sweep decrease of the relative error falls below
    /// this value.
    pub tol: f64,
    pub seed: u64,
    /// Number of independently initialized runs; the best final fit wins.
    pub restarts: usize,
    /// Ridge added to the Gram system of each least-squares update.
    pub ridge: f64,
    pub init: CpInit,
}

impl Default for CpOptions {
    fn default() -> Self {
        CpOptions {
            max_iters: 200,
            tol: 1e-8,
            seed: 42,
            restarts: 3,
            ridge: 0.0,
            init: CpInit::Random,
        }
    }
}

/// Khatri-Rao product of every factor except `skip`, chained so that the
/// lowest-numbered mode's index varies fastest along the rows. Row ordering
/// matches the column ordering of the mode-`skip` unfolding.
pub(crate) fn khatri_rao_chain(factors: &[Matrix], skip: usize) -> Result<Matrix> {
    let mut acc: Option<Matrix> = None;
    for (k, f) in factors.iter().enumerate().rev() {
        if k == skip {
            continue;
        }
        acc = Some(match acc {
            None => f.clone(),
            Some(a) => a.khatri_rao(f)?,
        });
    }
    acc.ok_or_else(|| Error::invalid("khatri-rao chain needs at least one factor"))
}

/// Scales every column to unit 2-norm and returns the removed norms. Zero
/// columns stay zero and report weight 0.
pub(crate) fn normalize_columns(m: &mut Matrix) -> Vec<f64> {
    let mut norms = vec![0.0; m.cols()];
    for j in 0..m.cols() {
        let mut s = 0.0;
        for i in 0..m.rows() {
            s += m[(i, j)] * m[(i, j)];
        }
        let norm = s.sqrt();
        norms[j] = norm;
        if norm > 0.0 {
            let inv = 1.0 / norm;
            for i in 0..m.rows() {
                m[(i, j)] *= inv;
            }
        }
    }
    norms
}

/// Orders components by descending weight and orients factor columns so the
/// dominant entry of each is nonnegative where possible. Sign flips are
/// applied to factors in pairs, keeping both the weights and the
/// reconstruction unchanged; an odd leftover flip stays on the highest mode.
pub(crate) fn finalize_cp(weights: Vec<f64>, factors: Vec<Matrix>) -> Result<CpModel> {
    let rank = weights.len();
    let mut order: Vec<usize> = (0..rank).collect();
    order.sort_by(|&a, &b| weights[b].partial_cmp(&weights[a]).unwrap());

    let mut sorted_weights = vec![0.0; rank];
    let mut sorted_factors: Vec<Matrix> = factors
        .iter()
        .map(|f| Matrix::zeros(f.rows(), rank))
        .collect();
    for (dst, &src) in order.iter().enumerate() {
        sorted_weights[dst] = weights[src];
        for (f_dst, f_src) in sorted_factors.iter_mut().zip(&factors) {
            for i in 0..f_src.rows() {
                f_dst[(i, dst)] = f_src[(i, src)];
            }
        }
    }

    for r in 0..rank {
        let mut negative_modes = Vec::new();
        for (n, f) in sorted_factors.iter().enumerate() {
            let mut best = 0usize;
            let mut best_abs = 0.0f64;
            for i in 0..f.rows() {
                let a = f[(i, r)].abs();
                if a > best_abs {
                    best_abs = a;
                    best = i;
                }
            }
            if best_abs > 0.0 && f[(best, r)] < 0.0 {
                negative_modes.push(n);
            }
        }
        let flips = negative_modes.len() - negative_modes.len() % 2;
        for &n in &negative_modes[..flips] {
            let f = &mut sorted_factors[n];
            for i in 0..f.rows() {
                f[(i, r)] = -f[(i, r)];
            }
        }
    }

    CpModel::new(sorted_weights, sorted_factors)
}

pub(crate) fn init_factors(
    t: &DenseTensor,
    rank: usize,
    init: CpInit,
    rng: &mut ChaCha8Rng,
) -> Result<Vec<Matrix>> {
    let dims = t.shape().dims();
    let mut factors = Vec::with_capacity(dims.len());
    for (n, &dim) in dims.iter().enumerate() {
        let mut f = Matrix::from_fn(dim, rank, |_, _| StandardNormal.sample(rng));
        if init == CpInit::Hosvd {
            let k = rank.min(dim);
            let svd = truncated_svd(&t.unfold(n)?, k)?;
            for j in 0..k {
                for i in 0..dim {
                    f[(i, j)] = svd.u[(i, j)];
                }
            }
        }
        factors.push(f);
    }
    Ok(factors)
}

/// Fits a rank-`rank` CP model by alternating least squares. Each mode
/// update solves the exact least-squares problem for that factor via the
/// Gram-matrix pseudoinverse; column norms are folded into the weights.
/// The best of `opts.restarts` independently seeded runs is returned.
pub fn cp_als(t: &DenseTensor, rank: usize, opts: &CpOptions) -> Result<(CpModel, FitReport)> {
    if rank == 0 {
        return Err(Error::invalid("CP rank must be at least 1"));
    }
    if t.order() < 2 {
        return Err(Error::invalid("CP fitting needs at least two modes"));
    }
    let norm = t.frobenius_norm();
    if norm == 0.0 {
        return Err(Error::invalid("cannot fit a CP model to a zero tensor"));
    }
    if opts.restarts == 0 || opts.max_iters == 0 {
        return Err(Error::invalid("restarts and max_iters must be at least 1"));
    }

    let order = t.order();
    let unfoldings: Vec<Matrix> = (0..order)
        .map(|n| t.unfold(n))
        .collect::<Result<Vec<_>>>()?;

    let mut best: Option<(CpModel, FitReport)> = None;
    for restart in 0..opts.restarts {
        let mut rng = ChaCha8Rng::seed_from_u64(opts.seed.wrapping_add(restart as u64));
        let mut factors = init_factors(t, rank, opts.init, &mut rng)?;
        let mut weights = vec![1.0; rank];
        let mut grams: Vec<Matrix> = factors.iter().map(Matrix::gram).collect();

        let mut errors = Vec::new();
        let mut converged = false;
        for _ in 0..opts.max_iters {
            for n in 0..order {
                let kr = khatri_rao_chain(&factors, n)?;
                let mttkrp = unfoldings[n].matmul(&kr)?;
                let gram_had = Matrix::from_fn(rank, rank, |i, j| {
                    let mut v = 1.0;
                    for (k, g) in grams.iter().enumerate() {
                        if k != n {
                            v *= g[(i, j)];
                        }
                    }
                    v
                });
                let updated = mttkrp.matmul(&pinv_sym(&gram_had, opts.ridge)?)?;
                factors[n] = updated;
                weights = normalize_columns(&mut factors[n]);
                grams[n] = factors[n].gram();
            }

            let model = CpModel::new(weights.clone(), factors.clone())?;
            let err = t.sub(&model.reconstruct()?)?.frobenius_norm() / norm;
            let prev = errors.last().copied();
            errors.push(err);
            if let Some(p) = prev {
                if p - err < opts.tol {
                    converged = true;
                    break;
                }
            }
        }

        let report = FitReport {
            iterations: errors.len(),
            converged,
            errors,
            step_truncation: Vec::new(),
        };
        let model = finalize_cp(weights, factors)?;
        let better = match &best {
            None => true,
            Some((_, b)) => report.final_error() < b.final_error(),
        };
        if better {
            best = Some((model, report));
        }
    }
    Ok(best.unwrap())
}

/// Dense tensor described by a CP model.
pub fn cp_reconstruct(model: &CpModel) -> Result<DenseTensor> {
    let dims = model.dims();
    if dims.len() == 1 {
        let f = &model.factors()[0];
        let data: Vec<f64> = (0..f.rows())
            .map(|i| {
                (0..model.rank())
                    .map(|r| model.weights()[r] * f[(i, r)])
                    .sum()
            })
            .collect();
        return DenseTensor::from_data(Shape::new(dims)?, data);
    }
    let kr = khatri_rao_chain(model.factors(), 0)?;
    let scaled = Matrix::from_fn(dims[0], model.rank(), |i, r| {
        model.factors()[0][(i, r)] * model.weights()[r]
    });
    let unfolded = scaled.matmul(&kr.transpose())?;
    DenseTensor::fold(&unfolded, 0, Shape::new(dims)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rank_one() -> DenseTensor {
        DenseTensor::outer_product(&[
            vec![1.0, 2.0],
            vec![0.5, -1.0, 2.0],
            vec![3.0, 1.0, 0.0, -2.0],
        ])
        .unwrap()
    }

    #[test]
    fn reconstruct_matches_weighted_outer_products() {
        let factors = vec![
            Matrix::from_rows(&[vec![1.0, 0.0], vec![0.0, 1.0]]).unwrap(),
            Matrix::from_rows(&[vec![1.0, 1.0], vec![2.0, -1.0]]).unwrap(),
        ];
        let model = CpModel::new(vec![2.0, 3.0], factors).unwrap();
        let t = cp_reconstruct(&model).unwrap();
        let a = &model.factors()[0];
        let b = &model.factors()[1];
        for i in 0..2 {
            for j in 0..2 {
                let expected = 2.0 * a[(i, 0)] * b[(j, 0)] + 3.0 * a[(i, 1)] * b[(j, 1)];
                assert!((t.get(&[i, j]).unwrap() - expected).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn rank_one_recovery_is_exact() {
        let t = rank_one();
        let opts = CpOptions {
            max_iters: 100,
            tol: 1e-14,
            ..CpOptions::default()
        };
        let (model, report) = cp_als(&t, 1, &opts).unwrap();
        assert!(report.final_error() < 1e-12);
        // Unit-norm factors make the weight carry the full magnitude.
        let expected = t.frobenius_norm();
        assert!((model.weights()[0] - expected).abs() < 1e-10 * expected);
        for f in model.factors() {
            let norm: f64 = f.col(0).iter().map(|x| x * x).sum::<f64>().sqrt();
            assert!((norm - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn weights_are_sorted_and_nonnegative() {
        let a = DenseTensor::outer_product(&[vec![1.0, 0.0], vec![1.0, 0.0], vec![1.0, 0.0]])
            .unwrap();
        let mut b =
            DenseTensor::outer_product(&[vec![0.0, 1.0], vec![0.0, 1.0], vec![0.0, 1.0]]).unwrap();
        b.scale(-5.0);
        let t = a.add(&b).unwrap();
        let (model, report) = cp_als(&t, 2, &CpOptions::default()).unwrap();
        assert!(report.final_error() < 1e-10);
        assert!(model.weights()[0] >= model.weights()[1]);
        for w in model.weights() {
            assert!(*w >= 0.0);
        }
        let back = model.reconstruct().unwrap();
        assert!(t.max_abs_diff(&back).unwrap() < 1e-10);
    }

    #[test]
    fn dominant_entries_flip_in_pairs() {
        let t = DenseTensor::outer_product(&[
            vec![-3.0, 1.0],
            vec![-2.0, 0.5],
            vec![1.0, 4.0],
        ])
        .unwrap();
        let (model, _) = cp_als(&t, 1, &CpOptions::default()).unwrap();
        let negatives = model
            .factors()
            .iter()
            .filter(|f| {
                let col = f.col(0);
                let mut best = 0;
                for i in 0..col.len() {
                    if col[i].abs() > col[best].abs() {
                        best = i;
                    }
                }
                col[best] < 0.0
            })
            .count();
        // Two sign-dominant-negative modes cancel pairwise.
        assert!(negatives <= 1);
        assert!(model.weights()[0] > 0.0);
        let back = model.reconstruct().unwrap();
        assert!(t.max_abs_diff(&back).unwrap() < 1e-10);
    }

    #[test]
    fn error_trace_is_monotone() {
        let t = DenseTensor::from_fn(Shape::new(vec![4, 5, 3]).unwrap(), |idx| {
            ((idx[0] * 31 + idx[1] * 17 + idx[2] * 11) % 23) as f64 - 11.0
        })
        .unwrap();
        let opts = CpOptions {
            max_iters: 60,
            tol: 0.0,
            restarts: 1,
            ..CpOptions::default()
        };
        let (_, report) = cp_als(&t, 3, &opts).unwrap();
        for w in report.errors.windows(2) {
            assert!(w[1] <= w[0] + 1e-12, "{} then {}", w[0], w[1]);
        }
    }

    #[test]
    fn matrix_input_behaves_like_svd() {
        let m = Matrix::from_fn(5, 4, |i, j| ((i * 7 + j * 3) % 6) as f64 - 2.0);
        let t = DenseTensor::from_matrix(&m);
        let opts = CpOptions {
            max_iters: 300,
            tol: 1e-13,
            restarts: 4,
            ..CpOptions::default()
        };
        let (_, report) = cp_als(&t, 4, &opts).unwrap();
        assert!(report.final_error() < 1e-8, "{}", report.final_error());
    }

    #[test]
    fn hosvd_init_also_converges() {
        let t = rank_one();
        let opts = CpOptions {
            init: CpInit::Hosvd,
            restarts: 1,
            ..CpOptions::default()
        };
        let (_, report) = cp_als(&t, 1, &opts).unwrap();
        assert!(report.final_error() < 1e-12);
    }

    #[test]
    fn zero_tensor_is_rejected() {
        let t = DenseTensor::zeros(Shape::new(vec![2, 2]).unwrap()).unwrap();
        assert!(cp_als(&t, 1, &CpOptions::default()).is_err());
    }

    #[test]
    fn identical_seeds_give_identical_fits() {
        let t = rank_one();
        let (m1, r1) = cp_als(&t, 2, &CpOptions::default()).unwrap();
        let (m2, r2) = cp_als(&t, 2, &CpOptions::default()).unwrap();
        assert_eq!(r1.errors, r2.errors);
        assert_eq!(m1.weights(), m2.weights());
        for (a, b) in m1.factors().iter().zip(m2.factors()) {
            assert_eq!(a.data(), b.data());
        }
    }
}
