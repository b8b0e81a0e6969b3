use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::decomp::{finalize_cp, init_factors, normalize_columns, CpInit, CpModel, FitReport};
use crate::error::{Error, Result};
use crate::linalg::pinv_sym;
use crate::tensor::{densify_budget, DenseTensor, Matrix, SparseTensor};

/// Set of observed positions for completion: a sparse indicator whose stored
/// entries are exactly 1.
#[derive(Debug, Clone)]
pub struct ObservationMask {
    indicator: SparseTensor,
}

impl ObservationMask {
    /// Builds a mask from an indicator tensor; every stored value must be 1.
    pub fn from_sparse(indicator: SparseTensor) -> Result<Self> {
        for (idx, v) in indicator.iter() {
            if v != 1.0 {
                return Err(Error::invalid(format!(
                    "mask entry at {idx:?} is {v}, expected 1"
                )));
            }
        }
        if indicator.nnz() == 0 {
            return Err(Error::invalid("a mask needs at least one observed position"));
        }
        Ok(ObservationMask { indicator })
    }

    pub fn all_ones(shape: crate::tensor::Shape) -> Result<Self> {
        let len = shape.dense_len()?;
        let mut s = SparseTensor::new(shape.clone());
        for off in 0..len {
            s.insert(shape.index_of(off), 1.0)?;
        }
        ObservationMask::from_sparse(s)
    }

    pub fn shape(&self) -> &crate::tensor::Shape {
        self.indicator.shape()
    }

    pub fn count(&self) -> usize {
        self.indicator.nnz()
    }

    pub fn is_observed(&self, index: &[usize]) -> bool {
        self.indicator.contains(index)
    }

    pub fn observed(&self) -> impl Iterator<Item = &[usize]> {
        self.indicator.iter().map(|(idx, _)| idx)
    }
}

#[derive(Debug, Clone)]
pub struct CompletionOptions {
    pub max_iters: usize,
    /// Stop once the per-sweep decrease of the observed relative error
    /// falls below this value.
    pub tol: f64,
    pub seed: u64,
    /// Ridge added to each row's normal equations for stability.
    pub ridge: f64,
    /// Independently initialized runs; the best final fit wins. Masked ALS
    /// from an unlucky random init can stall in a sign trap or a swamp of
    /// canceling components, so more than one start is the default.
    pub restarts: usize,
    /// Start for the first run; later runs are always random. `Hosvd` seeds
    /// it with the leading singular vectors of the zero-filled tensor's
    /// unfoldings, which lands far from the swamps random starts can fall
    /// into, and quietly degrades to `Random` when the shape is too large to
    /// densify under the current budget.
    pub init: CpInit,
}

impl Default for CompletionOptions {
    fn default() -> Self {
        CompletionOptions {
            max_iters: 300,
            tol: 1e-10,
            seed: 42,
            ridge: 1e-12,
            restarts: 3,
            init: CpInit::Hosvd,
        }
    }
}

/// How unobserved and observed cells combine in the completed tensor.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FillPolicy {
    /// Observed cells keep their input values; only holes are filled.
    KeepObserved,
    /// Every cell takes the model value.
    ModelEverywhere,
}

/// Fits a CP model to the observed entries only, by row-wise alternating
/// least squares: each row of each factor solves a small normal-equation
/// system assembled from the observed cells in its slice. With a full mask
/// this minimizes the same objective as dense CP fitting.
pub fn cp_complete(
    observed: &SparseTensor,
    mask: &ObservationMask,
    rank: usize,
    opts: &CompletionOptions,
) -> Result<(CpModel, FitReport)> {
    let shape = observed.shape().clone();
    if mask.shape() != &shape {
        return Err(Error::ShapeMismatch {
            expected: shape.to_string(),
            got: mask.shape().to_string(),
        });
    }
    if rank == 0 {
        return Err(Error::invalid("CP rank must be at least 1"));
    }
    if shape.order() < 2 {
        return Err(Error::invalid("completion needs at least two modes"));
    }
    for (idx, _) in observed.iter() {
        if !mask.is_observed(idx) {
            return Err(Error::invalid(format!(
                "value stored at {idx:?} lies outside the observation mask"
            )));
        }
    }

    // Observed positions with their values (holes in `observed` read as 0).
    let entries: Vec<(Vec<usize>, f64)> = mask
        .observed()
        .map(|idx| Ok((idx.to_vec(), observed.get(idx)?)))
        .collect::<Result<Vec<_>>>()?;
    let norm2: f64 = entries.iter().map(|(_, v)| v * v).sum();
    if norm2 == 0.0 {
        return Err(Error::invalid("all observed values are zero"));
    }

    let order = shape.order();
    // Entries grouped by their index along each mode.
    let mut slices: Vec<Vec<Vec<usize>>> = (0..order)
        .map(|n| vec![Vec::new(); shape.dim(n)])
        .collect();
    for (e, (idx, _)) in entries.iter().enumerate() {
        for n in 0..order {
            slices[n][idx[n]].push(e);
        }
    }
    for (n, per_row) in slices.iter().enumerate() {
        for (i, rows) in per_row.iter().enumerate() {
            if rows.is_empty() {
                return Err(Error::EmptySlice { mode: n, index: i });
            }
        }
    }

    if opts.restarts == 0 || opts.max_iters == 0 {
        return Err(Error::invalid("restarts and max_iters must be at least 1"));
    }

    // Rank-one term products across all modes except `skip`, for one cell.
    let kr_row = |factors: &[Matrix], idx: &[usize], skip: usize, out: &mut [f64]| {
        out.fill(1.0);
        for (k, f) in factors.iter().enumerate() {
            if k == skip {
                continue;
            }
            for (r, o) in out.iter_mut().enumerate() {
                *o *= f[(idx[k], r)];
            }
        }
    };

    let zero_filled = if opts.init == CpInit::Hosvd && shape.size() <= densify_budget() {
        let mut t = DenseTensor::zeros(shape.clone())?;
        for (idx, v) in &entries {
            t.set(idx, *v)?;
        }
        Some(t)
    } else {
        None
    };

    let mut kr = vec![0.0; rank];
    let mut best: Option<(CpModel, FitReport)> = None;
    for restart in 0..opts.restarts {
        let mut rng = ChaCha8Rng::seed_from_u64(opts.seed.wrapping_add(restart as u64));
        let mut factors: Vec<Matrix> = match (&zero_filled, restart) {
            (Some(t), 0) => init_factors(t, rank, CpInit::Hosvd, &mut rng)?,
            _ => shape
                .dims()
                .iter()
                .map(|&d| Matrix::from_fn(d, rank, |_, _| StandardNormal.sample(&mut rng)))
                .collect(),
        };

        // Factor scales float freely during the sweeps; columns are
        // normalized into weights only once at the end.
        let mut errors = Vec::new();
        let mut converged = false;
        for _ in 0..opts.max_iters {
            for n in 0..order {
                for i in 0..shape.dim(n) {
                    let mut gram = Matrix::zeros(rank, rank);
                    let mut rhs = vec![0.0; rank];
                    for &e in &slices[n][i] {
                        let (idx, v) = &entries[e];
                        kr_row(&factors, idx, n, &mut kr);
                        for p in 0..rank {
                            rhs[p] += v * kr[p];
                            for q in p..rank {
                                gram[(p, q)] += kr[p] * kr[q];
                            }
                        }
                    }
                    for p in 0..rank {
                        for q in 0..p {
                            gram[(p, q)] = gram[(q, p)];
                        }
                    }
                    let solution = pinv_sym(&gram, opts.ridge)?.matvec(&rhs)?;
                    for r in 0..rank {
                        factors[n][(i, r)] = solution[r];
                    }
                }
            }

            let mut err2 = 0.0;
            for (idx, v) in &entries {
                let mut pred = 0.0;
                for r in 0..rank {
                    let mut p = 1.0;
                    for (k, f) in factors.iter().enumerate() {
                        p *= f[(idx[k], r)];
                    }
                    pred += p;
                }
                let d = v - pred;
                err2 += d * d;
            }
            let err = (err2 / norm2).sqrt();
            let prev = errors.last().copied();
            errors.push(err);
            if let Some(p) = prev {
                if p - err < opts.tol {
                    converged = true;
                    break;
                }
            }
        }

        let mut weights = vec![1.0; rank];
        for f in &mut factors {
            let norms = normalize_columns(f);
            for (w, n) in weights.iter_mut().zip(norms) {
                *w *= n;
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

/// Materializes the completed tensor from a fitted model, respecting the
/// fill policy for observed cells.
pub fn completed_tensor(
    observed: &SparseTensor,
    mask: &ObservationMask,
    model: &CpModel,
    policy: FillPolicy,
) -> Result<DenseTensor> {
    let shape = observed.shape();
    if shape.size() > densify_budget() {
        return Err(Error::BudgetExceeded {
            size: shape.size(),
            budget: densify_budget(),
        });
    }
    let mut out = model.reconstruct()?;
    if out.shape() != shape {
        return Err(Error::ShapeMismatch {
            expected: shape.to_string(),
            got: out.shape().to_string(),
        });
    }
    if policy == FillPolicy::KeepObserved {
        for idx in mask.observed() {
            let off = shape.offset(idx)?;
            out.data_mut()[off] = observed.get(idx)?;
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::decomp::{cp_als, CpOptions};
    use crate::tensor::Shape;
    use rand::Rng;

    fn low_rank_tensor() -> DenseTensor {
        let a = DenseTensor::outer_product(&[
            vec![1.0, 0.6, -0.4, 0.9],
            vec![0.8, -0.5, 0.3, 0.2, 0.7],
            vec![0.4, 0.9, -0.2],
        ])
        .unwrap();
        let mut b = DenseTensor::outer_product(&[
            vec![-0.3, 0.8, 0.5, -0.6],
            vec![0.2, 0.7, -0.8, 0.5, -0.1],
            vec![0.9, -0.3, 0.6],
        ])
        .unwrap();
        b.scale(0.7);
        a.add(&b).unwrap()
    }

    fn split_mask(
        t: &DenseTensor,
        keep: f64,
        seed: u64,
    ) -> (SparseTensor, ObservationMask, Vec<Vec<usize>>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let shape = t.shape().clone();
        let mut observed = SparseTensor::new(shape.clone());
        let mut indicator = SparseTensor::new(shape.clone());
        let mut hidden = Vec::new();
        for off in 0..t.len() {
            let idx = shape.index_of(off);
            if rng.random::<f64>() < keep {
                indicator.insert(idx.clone(), 1.0).unwrap();
                observed.insert(idx, t.data()[off]).unwrap();
            } else {
                hidden.push(idx);
            }
        }
        (observed, ObservationMask::from_sparse(indicator).unwrap(), hidden)
    }

    #[test]
    fn recovers_hidden_entries_of_low_rank_tensor() {
        let t = low_rank_tensor();
        let (observed, mask, hidden) = split_mask(&t, 0.7, 7);
        assert!(!hidden.is_empty());
        let opts = CompletionOptions {
            max_iters: 500,
            tol: 1e-14,
            ..CompletionOptions::default()
        };
        let (model, report) = cp_complete(&observed, &mask, 2, &opts).unwrap();
        assert!(report.final_error() < 1e-8, "{}", report.final_error());
        let full = model.reconstruct().unwrap();
        let mut worst = 0.0f64;
        for idx in &hidden {
            let diff = (full.get(idx).unwrap() - t.get(idx).unwrap()).abs();
            worst = worst.max(diff);
        }
        assert!(worst < 1e-6, "worst hidden-entry error {worst}");
    }

    #[test]
    fn observed_error_is_monotone() {
        let t = low_rank_tensor();
        let (observed, mask, _) = split_mask(&t, 0.8, 13);
        let opts = CompletionOptions {
            max_iters: 40,
            tol: 0.0,
            ..CompletionOptions::default()
        };
        let (_, report) = cp_complete(&observed, &mask, 2, &opts).unwrap();
        for w in report.errors.windows(2) {
            assert!(w[1] <= w[0] + 1e-12);
        }
    }

    #[test]
    fn full_mask_agrees_with_dense_fit() {
        let t = low_rank_tensor();
        let observed = SparseTensor::from_dense(&t, 0.0);
        let mask = ObservationMask::all_ones(t.shape().clone()).unwrap();
        let c_opts = CompletionOptions {
            max_iters: 600,
            tol: 1e-15,
            seed: 3,
            ridge: 0.0,
            restarts: 2,
            init: CpInit::Random,
        };
        let (c_model, c_report) = cp_complete(&observed, &mask, 2, &c_opts).unwrap();
        let a_opts = CpOptions {
            max_iters: 600,
            tol: 1e-15,
            seed: 3,
            restarts: 2,
            ..CpOptions::default()
        };
        let (a_model, a_report) = cp_als(&t, 2, &a_opts).unwrap();
        assert!(c_report.final_error() < 1e-10);
        assert!(a_report.final_error() < 1e-10);
        let diff = c_model
            .reconstruct()
            .unwrap()
            .sub(&a_model.reconstruct().unwrap())
            .unwrap()
            .frobenius_norm()
            / t.frobenius_norm();
        assert!(diff < 1e-10, "reconstruction gap {diff}");
    }

    #[test]
    fn empty_slice_is_reported() {
        let shape = Shape::new(vec![3, 3]).unwrap();
        let mut observed = SparseTensor::new(shape.clone());
        let mut indicator = SparseTensor::new(shape);
        // Row 1 of mode 0 has no observations.
        for &(i, j) in &[(0usize, 0usize), (0, 1), (2, 0), (2, 2)] {
            observed.insert(vec![i, j], 1.0).unwrap();
            indicator.insert(vec![i, j], 1.0).unwrap();
        }
        let mask = ObservationMask::from_sparse(indicator).unwrap();
        let err = cp_complete(&observed, &mask, 1, &CompletionOptions::default()).unwrap_err();
        match err {
            Error::EmptySlice { mode, index } => {
                assert_eq!(mode, 0);
                assert_eq!(index, 1);
            }
            other => panic!("unexpected error: {other}"),
        }
    }

    #[test]
    fn values_outside_mask_are_rejected() {
        let shape = Shape::new(vec![2, 2]).unwrap();
        let mut observed = SparseTensor::new(shape.clone());
        observed.insert(vec![0, 0], 1.0).unwrap();
        observed.insert(vec![1, 1], 2.0).unwrap();
        let mut indicator = SparseTensor::new(shape);
        indicator.insert(vec![0, 0], 1.0).unwrap();
        let mask = ObservationMask::from_sparse(indicator).unwrap();
        assert!(cp_complete(&observed, &mask, 1, &CompletionOptions::default()).is_err());
    }

    #[test]
    fn mask_values_must_be_one() {
        let shape = Shape::new(vec![2, 2]).unwrap();
        let mut indicator = SparseTensor::new(shape);
        indicator.insert(vec![0, 0], 0.5).unwrap();
        assert!(ObservationMask::from_sparse(indicator).is_err());
    }

    #[test]
    fn fill_policy_keeps_observed_cells() {
        let t = low_rank_tensor();
        let (observed, mask, hidden) = split_mask(&t, 0.6, 23);
        let opts = CompletionOptions::default();
        let (model, _) = cp_complete(&observed, &mask, 2, &opts).unwrap();
        let kept = completed_tensor(&observed, &mask, &model, FillPolicy::KeepObserved).unwrap();
        for idx in mask.observed() {
            assert_eq!(kept.get(idx).unwrap(), observed.get(idx).unwrap());
        }
        let modeled =
            completed_tensor(&observed, &mask, &model, FillPolicy::ModelEverywhere).unwrap();
        let recon = model.reconstruct().unwrap();
        assert_eq!(modeled.data(), recon.data());
        assert!(!hidden.is_empty());
    }
}

