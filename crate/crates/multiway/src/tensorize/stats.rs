use crate::error::{Error, Result};
use crate::tensor::{densify_budget, DenseTensor, Matrix, Shape};

/// k-th central moment of a sample, with population normalization.
pub fn central_moment(sample: &[f64], order: usize) -> Result<f64> {
    if sample.is_empty() {
        return Err(Error::invalid("central moment of an empty sample"));
    }
    if order == 0 {
        return Ok(1.0);
    }
    let n = sample.len() as f64;
    let mean = sample.iter().sum::<f64>() / n;
    Ok(sample
        .iter()
        .map(|&x| (x - mean).powi(order as i32))
        .sum::<f64>()
        / n)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CumulantOrder {
    Third,
    Fourth,
}

/// Joint cumulant tensor of multivariate data given as an
/// observations-by-variables matrix, using population normalization.
///
/// The third cumulant equals the third central moment. The fourth subtracts
/// the three pairwise covariance products:
/// `k4[i,j,k,l] = m4[i,j,k,l] - c[i,j]c[k,l] - c[i,k]c[j,l] - c[i,l]c[j,k]`.
/// Each distinct sorted index combination is computed once and copied to all
/// permutations, making the symmetry bit-exact.
pub fn cumulant_tensor(x: &Matrix, order: CumulantOrder) -> Result<DenseTensor> {
    let n = x.rows();
    let d = x.cols();
    if n == 0 {
        return Err(Error::invalid("cumulant of an empty sample"));
    }
    let mut centered = x.clone();
    for j in 0..d {
        let mean: f64 = (0..n).map(|i| x[(i, j)]).sum::<f64>() / n as f64;
        for i in 0..n {
            centered[(i, j)] -= mean;
        }
    }
    let moment = |idx: &[usize]| -> f64 {
        let mut s = 0.0;
        for i in 0..n {
            let mut p = 1.0;
            for &j in idx {
                p *= centered[(i, j)];
            }
            s += p;
        }
        s / n as f64
    };

    let tensor_order = match order {
        CumulantOrder::Third => 3,
        CumulantOrder::Fourth => 4,
    };
    let shape = Shape::new(vec![d; tensor_order])?;
    let mut t = DenseTensor::zeros(shape)?;

    let cov = match order {
        CumulantOrder::Fourth => {
            let mut c = Matrix::zeros(d, d);
            for i in 0..d {
                for j in i..d {
                    let v = moment(&[i, j]);
                    c[(i, j)] = v;
                    c[(j, i)] = v;
                }
            }
            Some(c)
        }
        CumulantOrder::Third => None,
    };

    let mut idx = vec![0usize; tensor_order];
    fill_sorted(&mut idx, 0, 0, d, &mut |sorted| {
        let value = match order {
            CumulantOrder::Third => moment(sorted),
            CumulantOrder::Fourth => {
                let c = cov.as_ref().unwrap();
                let (i, j, k, l) = (sorted[0], sorted[1], sorted[2], sorted[3]);
                moment(sorted)
                    - c[(i, j)] * c[(k, l)]
                    - c[(i, k)] * c[(j, l)]
                    - c[(i, l)] * c[(j, k)]
            }
        };
        let mut perm = sorted.to_vec();
        write_permutations(&mut t, &mut perm, 0, value);
    });
    Ok(t)
}

/// Calls `f` for every nondecreasing index tuple.
fn fill_sorted(
    idx: &mut Vec<usize>,
    pos: usize,
    min: usize,
    d: usize,
    f: &mut impl FnMut(&[usize]),
) {
    if pos == idx.len() {
        f(idx);
        return;
    }
    for v in min..d {
        idx[pos] = v;
        fill_sorted(idx, pos + 1, v, d, f);
    }
}

/// Writes `value` at every distinct permutation of `idx[from..]`.
fn write_permutations(t: &mut DenseTensor, idx: &mut Vec<usize>, from: usize, value: f64) {
    if from == idx.len() {
        t.set(&idx.clone(), value).unwrap();
        return;
    }
    for i in from..idx.len() {
        if (from..i).any(|p| idx[p] == idx[i]) {
            continue;
        }
        idx.swap(from, i);
        write_permutations(t, idx, from + 1, value);
        idx.swap(from, i);
    }
}

/// Lagged covariance stack of a channels-by-time signal: slice `l` holds
/// `(1 / (T - lag)) * sum_t xc[a, t] * xc[b, t + lag]` for the l-th lag,
/// with rows centered first. Shape: (channels, channels, lags).
pub fn lagged_covariance(x: &Matrix, lags: &[usize]) -> Result<DenseTensor> {
    let c = x.rows();
    let t_len = x.cols();
    if lags.is_empty() {
        return Err(Error::invalid("at least one lag is required"));
    }
    for &lag in lags {
        if lag >= t_len {
            return Err(Error::invalid(format!(
                "lag {lag} is out of range for {t_len} samples"
            )));
        }
    }
    let mut centered = x.clone();
    for a in 0..c {
        let mean: f64 = centered.row(a).iter().sum::<f64>() / t_len as f64;
        for v in centered.row_mut(a) {
            *v -= mean;
        }
    }
    let shape = Shape::new(vec![c, c, lags.len()])?;
    let mut out = DenseTensor::zeros(shape)?;
    for (l, &lag) in lags.iter().enumerate() {
        let denom = (t_len - lag) as f64;
        for a in 0..c {
            for b in 0..c {
                let mut s = 0.0;
                for t in 0..t_len - lag {
                    s += centered[(a, t)] * centered[(b, t + lag)];
                }
                out.set(&[a, b, l], s / denom)?;
            }
        }
    }
    Ok(out)
}

/// Covariance of tensor-valued observations: flattens each observation,
/// computes the population covariance of the flattened vectors, and
/// reshapes it to the doubled shape `S ++ S`.
pub fn higher_order_covariance(observations: &[DenseTensor]) -> Result<DenseTensor> {
    let first = observations
        .first()
        .ok_or_else(|| Error::invalid("at least one observation is required"))?;
    let shape = first.shape().clone();
    for (i, o) in observations.iter().enumerate() {
        if o.shape() != &shape {
            return Err(Error::ShapeMismatch {
                expected: shape.to_string(),
                got: format!("{} (observation {i})", o.shape()),
            });
        }
    }
    let mut dims = shape.dims().to_vec();
    dims.extend_from_slice(shape.dims());
    let out_shape = Shape::new(dims)?;
    if out_shape.size() > densify_budget() {
        return Err(Error::BudgetExceeded {
            size: out_shape.size(),
            budget: densify_budget(),
        });
    }

    let p = shape.dense_len()?;
    let n = observations.len() as f64;
    let mut mean = vec![0.0; p];
    for o in observations {
        for (m, &v) in mean.iter_mut().zip(o.data()) {
            *m += v;
        }
    }
    for m in &mut mean {
        *m /= n;
    }
    let mut out = DenseTensor::zeros(out_shape)?;
    let data = out.data_mut();
    for o in observations {
        for a in 0..p {
            let da = o.data()[a] - mean[a];
            if da == 0.0 {
                continue;
            }
            let row = &mut data[a * p..(a + 1) * p];
            for (b, slot) in row.iter_mut().enumerate() {
                *slot += da * (o.data()[b] - mean[b]);
            }
        }
    }
    for v in data {
        *v /= n;
    }
    Ok(out)
}
