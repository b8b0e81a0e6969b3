use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::decomp::{khatri_rao_chain, FitReport};
use crate::error::{Error, Result};
use crate::linalg::solve_ridge;
use crate::tensor::{DenseTensor, Matrix, Shape};

/// One supervised observation: a tensor input, optional scalar covariates,
/// and a scalar response.
#[derive(Debug, Clone)]
pub struct RegressionSample {
    pub x: DenseTensor,
    pub covariates: Vec<f64>,
    pub y: f64,
}

#[derive(Debug, Clone)]
pub struct RegressionOptions {
    pub max_sweeps: usize,
    /// Stop once the per-sweep decrease of the training RMSE falls below
    /// this value.
    pub tol: f64,
    /// Ridge strength applied to every alternating least-squares block.
    pub lambda: f64,
    pub seed: u64,
}

impl Default for RegressionOptions {
    fn default() -> Self {
        RegressionOptions {
            max_sweeps: 100,
            tol: 1e-10,
            lambda: 1e-6,
            seed: 42,
        }
    }
}

/// Linear model whose coefficient tensor is constrained to CP structure:
/// `y = <X, B> + w^T z` with `B = sum_r factors[0][:,r] o ... o
/// factors[N-1][:,r]`.
#[derive(Debug, Clone)]
pub struct CpRegression {
    pub factors: Vec<Matrix>,
    pub covariate_weights: Vec<f64>,
    /// Root mean squared training residual of the final sweep.
    pub residual_scale: f64,
}

/// Linear model whose coefficient tensor is constrained to Tucker structure:
/// `B = core x_0 factors[0] ... x_{N-1} factors[N-1]`.
#[derive(Debug, Clone)]
pub struct TuckerRegression {
    pub core: DenseTensor,
    pub factors: Vec<Matrix>,
    pub covariate_weights: Vec<f64>,
    pub residual_scale: f64,
}

/// Anything that assembles a dense coefficient tensor and covariate weights.
pub trait CoefficientModel {
    fn coefficients(&self) -> Result<DenseTensor>;
    fn covariate_weights(&self) -> &[f64];
}

impl CoefficientModel for CpRegression {
    fn coefficients(&self) -> Result<DenseTensor> {
        let rank = self.factors[0].cols();
        let model = crate::decomp::CpModel::new(vec![1.0; rank], self.factors.clone())?;
        model.reconstruct()
    }

    fn covariate_weights(&self) -> &[f64] {
        &self.covariate_weights
    }
}

impl CoefficientModel for TuckerRegression {
    fn coefficients(&self) -> Result<DenseTensor> {
        let model =
            crate::decomp::TuckerModel::new(self.core.clone(), self.factors.clone())?;
        model.reconstruct()
    }

    fn covariate_weights(&self) -> &[f64] {
        &self.covariate_weights
    }
}

/// Response predicted for one input: `<X, B> + w^T z`.
pub fn regress_predict<M: CoefficientModel>(
    model: &M,
    x: &DenseTensor,
    z: &[f64],
) -> Result<f64> {
    let b = model.coefficients()?;
    let w = model.covariate_weights();
    if z.len() != w.len() {
        return Err(Error::invalid(format!(
            "expected {} covariates, got {}",
            w.len(),
            z.len()
        )));
    }
    Ok(x.inner_product(&b)? + w.iter().zip(z).map(|(&a, &b)| a * b).sum::<f64>())
}

fn validate_samples(samples: &[RegressionSample]) -> Result<(Shape, usize)> {
    let first = samples
        .first()
        .ok_or_else(|| Error::invalid("at least one sample is required"))?;
    let shape = first.x.shape().clone();
    if shape.order() < 2 {
        return Err(Error::invalid(
            "tensor regression needs inputs with at least two modes",
        ));
    }
    let n_cov = first.covariates.len();
    for (i, s) in samples.iter().enumerate() {
        if s.x.shape() != &shape {
            return Err(Error::ShapeMismatch {
                expected: shape.to_string(),
                got: format!("{} (sample {i})", s.x.shape()),
            });
        }
        if s.covariates.len() != n_cov {
            return Err(Error::invalid(format!(
                "sample {i} has {} covariates, expected {n_cov}",
                s.covariates.len()
            )));
        }
        if !s.y.is_finite() {
            return Err(Error::invalid(format!("sample {i} has a non-finite response")));
        }
    }
    Ok((shape, n_cov))
}

fn rmse<M: CoefficientModel>(model: &M, samples: &[RegressionSample]) -> Result<f64> {
    let b = model.coefficients()?;
    let w = model.covariate_weights();
    let mut sum = 0.0;
    for s in samples {
        let pred =
            s.x.inner_product(&b)? + w.iter().zip(&s.covariates).map(|(&a, &z)| a * z).sum::<f64>();
        let r = s.y - pred;
        sum += r * r;
    }
    Ok((sum / samples.len() as f64).sqrt())
}

/// Fits a CP-structured coefficient model by alternating ridge regression.
/// Each step rewrites the response as linear in one factor (through the
/// Khatri-Rao product of the others) and re-solves that factor jointly with
/// the covariate weights.
pub fn cp_regression_fit(
    samples: &[RegressionSample],
    rank: usize,
    opts: &RegressionOptions,
) -> Result<(CpRegression, FitReport)> {
    let (shape, n_cov) = validate_samples(samples)?;
    if rank == 0 {
        return Err(Error::invalid("CP rank must be at least 1"));
    }
    let order = shape.order();
    let m = samples.len();
    let y: Vec<f64> = samples.iter().map(|s| s.y).collect();

    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut factors: Vec<Matrix> = shape
        .dims()
        .iter()
        .map(|&d| Matrix::from_fn(d, rank, |_, _| StandardNormal.sample(&mut rng)))
        .collect();
    let mut weights = vec![0.0; n_cov];

    let unfoldings: Vec<Vec<Matrix>> = samples
        .iter()
        .map(|s| (0..order).map(|n| s.x.unfold(n)).collect::<Result<Vec<_>>>())
        .collect::<Result<Vec<_>>>()?;

    let mut errors = Vec::new();
    let mut converged = false;
    for _ in 0..opts.max_sweeps {
        for n in 0..order {
            let kr = khatri_rao_chain(&factors, n)?;
            let dim = shape.dim(n);
            let p = dim * rank + n_cov;
            let mut design = Matrix::zeros(m, p);
            for (row, s) in samples.iter().enumerate() {
                let g = unfoldings[row][n].matmul(&kr)?;
                design.row_mut(row)[..dim * rank].copy_from_slice(g.data());
                design.row_mut(row)[dim * rank..].copy_from_slice(&s.covariates);
            }
            let theta = solve_ridge(&design, &y, opts.lambda)?;
            factors[n] = Matrix::from_vec(dim, rank, theta[..dim * rank].to_vec())?;
            weights = theta[dim * rank..].to_vec();
        }
        let model = CpRegression {
            factors: factors.clone(),
            covariate_weights: weights.clone(),
            residual_scale: 0.0,
        };
        let err = rmse(&model, samples)?;
        let prev = errors.last().copied();
        errors.push(err);
        if let Some(p) = prev {
            if p - err < opts.tol {
                converged = true;
                break;
            }
        }
    }

    let residual_scale = errors.last().copied().unwrap_or(f64::NAN);
    let report = FitReport {
        iterations: errors.len(),
        converged,
        errors,
        step_truncation: Vec::new(),
    };
    Ok((
        CpRegression {
            factors,
            covariate_weights: weights,
            residual_scale,
        },
        report,
    ))
}

/// Fits a Tucker-structured coefficient model by alternating ridge
/// regression over the core and each factor. Factors start as identity
/// slices, so the first core solve is a ridge regression on the leading
/// subtensor of each input.
pub fn tucker_regression_fit(
    samples: &[RegressionSample],
    ranks: &[usize],
    opts: &RegressionOptions,
) -> Result<(TuckerRegression, FitReport)> {
    let (shape, n_cov) = validate_samples(samples)?;
    if ranks.len() != shape.order() {
        return Err(Error::invalid(format!(
            "{} ranks given for an order-{} input",
            ranks.len(),
            shape.order()
        )));
    }
    for (n, (&r, &d)) in ranks.iter().zip(shape.dims()).enumerate() {
        if r == 0 || r > d {
            return Err(Error::invalid(format!(
                "rank {r} for mode {n} is not in 1..={d}"
            )));
        }
    }
    let order = shape.order();
    let m = samples.len();
    let y: Vec<f64> = samples.iter().map(|s| s.y).collect();

    let mut factors: Vec<Matrix> = shape
        .dims()
        .iter()
        .zip(ranks)
        .map(|(&d, &r)| Matrix::from_fn(d, r, |i, j| if i == j { 1.0 } else { 0.0 }))
        .collect();
    let core_len: usize = ranks.iter().product();
    let mut core = DenseTensor::zeros(Shape::new(ranks.to_vec())?)?;
    let mut weights = vec![0.0; n_cov];

    let mut errors = Vec::new();
    let mut converged = false;
    for _ in 0..opts.max_sweeps {
        // Core and covariate weights.
        {
            let p = core_len + n_cov;
            let mut design = Matrix::zeros(m, p);
            for (row, s) in samples.iter().enumerate() {
                let mut proj = s.x.clone();
                for (k, f) in factors.iter().enumerate() {
                    proj = proj.mode_n_product(&f.transpose(), k)?;
                }
                design.row_mut(row)[..core_len].copy_from_slice(proj.data());
                design.row_mut(row)[core_len..].copy_from_slice(&s.covariates);
            }
            let theta = solve_ridge(&design, &y, opts.lambda)?;
            core = DenseTensor::from_data(
                Shape::new(ranks.to_vec())?,
                theta[..core_len].to_vec(),
            )?;
            weights = theta[core_len..].to_vec();
        }
        // Each factor with the covariate weights.
        for n in 0..order {
            let dim = shape.dim(n);
            let p = dim * ranks[n] + n_cov;
            let core_unfolded = core.unfold(n)?;
            let mut design = Matrix::zeros(m, p);
            for (row, s) in samples.iter().enumerate() {
                let mut partial = s.x.clone();
                for (k, f) in factors.iter().enumerate() {
                    if k != n {
                        partial = partial.mode_n_product(&f.transpose(), k)?;
                    }
                }
                let features = partial.unfold(n)?.matmul(&core_unfolded.transpose())?;
                design.row_mut(row)[..dim * ranks[n]].copy_from_slice(features.data());
                design.row_mut(row)[dim * ranks[n]..].copy_from_slice(&s.covariates);
            }
            let theta = solve_ridge(&design, &y, opts.lambda)?;
            factors[n] = Matrix::from_vec(dim, ranks[n], theta[..dim * ranks[n]].to_vec())?;
            weights = theta[dim * ranks[n]..].to_vec();
        }

        let model = TuckerRegression {
            core: core.clone(),
            factors: factors.clone(),
            covariate_weights: weights.clone(),
            residual_scale: 0.0,
        };
        let err = rmse(&model, samples)?;
        let prev = errors.last().copied();
        errors.push(err);
        if let Some(p) = prev {
            if p - err < opts.tol {
                converged = true;
                break;
            }
        }
    }

    let residual_scale = errors.last().copied().unwrap_or(f64::NAN);
    let report = FitReport {
        iterations: errors.len(),
        converged,
        errors,
        step_truncation: Vec::new(),
    };
    Ok((
        TuckerRegression {
            core,
            factors,
            covariate_weights: weights,
            residual_scale,
        },
        report,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    fn random_tensor(rng: &mut ChaCha8Rng, dims: &[usize]) -> DenseTensor {
        DenseTensor::from_fn(Shape::new(dims.to_vec()).unwrap(), |_| {
            StandardNormal.sample(rng)
        })
        .unwrap()
    }

    fn make_samples(
        seed: u64,
        count: usize,
        dims: &[usize],
        truth: &DenseTensor,
        w: &[f64],
        noise: f64,
    ) -> Vec<RegressionSample> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..count)
            .map(|_| {
                let x = random_tensor(&mut rng, dims);
                let covariates: Vec<f64> = w.iter().map(|_| rng.random::<f64>() - 0.5).collect();
                let mut y = x.inner_product(truth).unwrap()
                    + w.iter().zip(&covariates).map(|(&a, &z)| a * z).sum::<f64>();
                if noise > 0.0 {
                    let e: f64 = StandardNormal.sample(&mut rng);
                    y += noise * e;
                }
                RegressionSample { x, covariates, y }
            })
            .collect()
    }

    #[test]
    fn full_rank_tucker_recovers_exactly() {
        let dims = [2usize, 3];
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let truth = random_tensor(&mut rng, &dims);
        let w = [0.7, -1.3];
        let samples = make_samples(100, 40, &dims, &truth, &w, 0.0);
        let opts = RegressionOptions {
            lambda: 1e-10,
            max_sweeps: 20,
            ..RegressionOptions::default()
        };
        let (model, report) = tucker_regression_fit(&samples, &[2, 3], &opts).unwrap();
        assert!(report.final_error() < 1e-8, "{}", report.final_error());
        let b = model.coefficients().unwrap();
        assert!(truth.max_abs_diff(&b).unwrap() < 1e-6);
        for (got, want) in model.covariate_weights.iter().zip(&w) {
            assert!((got - want).abs() < 1e-6);
        }
    }

    #[test]
    fn cp_regression_recovers_low_rank_coefficients() {
        let dims = [4usize, 3, 3];
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let a = random_tensor(&mut rng, &[4]);
        let b = random_tensor(&mut rng, &[3]);
        let c = random_tensor(&mut rng, &[3]);
        let d = random_tensor(&mut rng, &[4]);
        let e = random_tensor(&mut rng, &[3]);
        let f = random_tensor(&mut rng, &[3]);
        let truth = DenseTensor::outer_product(&[
            a.data().to_vec(),
            b.data().to_vec(),
            c.data().to_vec(),
        ])
        .unwrap()
        .add(
            &DenseTensor::outer_product(&[
                d.data().to_vec(),
                e.data().to_vec(),
                f.data().to_vec(),
            ])
            .unwrap(),
        )
        .unwrap();
        let w = [0.5];
        let samples = make_samples(300, 200, &dims, &truth, &w, 0.0);
        let opts = RegressionOptions {
            lambda: 1e-9,
            max_sweeps: 400,
            tol: 1e-14,
            ..RegressionOptions::default()
        };
        let (model, report) = cp_regression_fit(&samples, 2, &opts).unwrap();
        assert!(report.final_error() < 1e-6, "rmse {}", report.final_error());
        let got = model.coefficients().unwrap();
        let rel = truth.sub(&got).unwrap().frobenius_norm() / truth.frobenius_norm();
        assert!(rel < 1e-4, "coefficient error {rel}");
        assert!((model.covariate_weights[0] - 0.5).abs() < 1e-4);
    }

    #[test]
    fn rmse_is_monotone_without_ridge() {
        let dims = [3usize, 3];
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        let truth = random_tensor(&mut rng, &dims);
        let samples = make_samples(400, 25, &dims, &truth, &[], 0.05);
        let opts = RegressionOptions {
            lambda: 0.0,
            max_sweeps: 40,
            tol: 0.0,
            ..RegressionOptions::default()
        };
        let (_, report) = cp_regression_fit(&samples, 2, &opts).unwrap();
        for w in report.errors.windows(2) {
            assert!(w[1] <= w[0] + 1e-12, "{} then {}", w[0], w[1]);
        }
    }

    #[test]
    fn rank_one_tucker_matches_rank_one_cp() {
        let dims = [4usize, 4, 4];
        let mut rng = ChaCha8Rng::seed_from_u64(41);
        let u = random_tensor(&mut rng, &[4]);
        let v = random_tensor(&mut rng, &[4]);
        let z = random_tensor(&mut rng, &[4]);
        let truth = DenseTensor::outer_product(&[
            u.data().to_vec(),
            v.data().to_vec(),
            z.data().to_vec(),
        ])
        .unwrap();
        let samples = make_samples(500, 150, &dims, &truth, &[], 0.01);
        let opts = RegressionOptions {
            max_sweeps: 300,
            tol: 1e-13,
            lambda: 1e-8,
            ..RegressionOptions::default()
        };
        let (_, cp_report) = cp_regression_fit(&samples, 1, &opts).unwrap();
        let (_, tucker_report) = tucker_regression_fit(&samples, &[1, 1, 1], &opts).unwrap();
        assert!(
            (cp_report.final_error() - tucker_report.final_error()).abs() < 1e-6,
            "cp {} vs tucker {}",
            cp_report.final_error(),
            tucker_report.final_error()
        );
    }

    #[test]
    fn predictions_match_training_targets_when_noiseless() {
        let dims = [3usize, 4];
        let mut rng = ChaCha8Rng::seed_from_u64(51);
        let truth = random_tensor(&mut rng, &dims);
        let w = [2.0, -0.25];
        let samples = make_samples(600, 60, &dims, &truth, &w, 0.0);
        let opts = RegressionOptions {
            lambda: 1e-10,
            ..RegressionOptions::default()
        };
        let (model, _) = tucker_regression_fit(&samples, &[3, 4], &opts).unwrap();
        for s in &samples {
            let pred = regress_predict(&model, &s.x, &s.covariates).unwrap();
            assert!((pred - s.y).abs() < 1e-6);
        }
    }

    #[test]
    fn sample_validation_catches_mismatches() {
        let a = RegressionSample {
            x: DenseTensor::zeros(Shape::new(vec![2, 2]).unwrap()).unwrap(),
            covariates: vec![1.0],
            y: 0.0,
        };
        let b = RegressionSample {
            x: DenseTensor::zeros(Shape::new(vec![2, 3]).unwrap()).unwrap(),
            covariates: vec![1.0],
            y: 0.0,
        };
        let opts = RegressionOptions::default();
        assert!(cp_regression_fit(&[a.clone(), b], 1, &opts).is_err());
        assert!(cp_regression_fit(&[], 1, &opts).is_err());
        let c = RegressionSample {
            covariates: vec![1.0, 2.0],
            ..a.clone()
        };
        assert!(cp_regression_fit(&[a.clone(), c], 1, &opts).is_err());
        assert!(tucker_regression_fit(&[a], &[2, 3], &opts).is_err());
    }
}
