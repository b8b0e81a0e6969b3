use crate::error::{Error, Result};
use crate::tensor::{DenseTensor, Matrix, Shape};

/// Hankel matrix of a signal: `h[i, j] = v[i + j]` with `window` rows and
/// `len - window + 1` columns. Every anti-diagonal is constant.
pub fn hankelize(v: &[f64], window: usize) -> Result<Matrix> {
    if window == 0 || window > v.len() {
        return Err(Error::invalid(format!(
            "window {window} not in 1..={} for a signal of length {}",
            v.len(),
            v.len()
        )));
    }
    let cols = v.len() - window + 1;
    Ok(Matrix::from_fn(window, cols, |i, j| v[i + j]))
}

/// Averages each anti-diagonal, recovering a signal of length
/// `rows + cols - 1`. Inverse of `hankelize` on true Hankel matrices; on
/// arbitrary matrices it is the least-squares projection onto them.
///
/// A constant anti-diagonal is returned as-is rather than averaged:
/// summing k equal floats and dividing by k can round, and the roundtrip
/// through `hankelize` should reproduce the signal exactly.
pub fn dehankelize(h: &Matrix) -> Vec<f64> {
    let rows = h.rows();
    let cols = h.cols();
    let len = rows + cols - 1;
    let mut sums = vec![0.0; len];
    let mut counts = vec![0usize; len];
    let mut first = vec![0.0; len];
    let mut constant = vec![true; len];
    for i in 0..rows {
        for j in 0..cols {
            let v = h[(i, j)];
            let s = i + j;
            if counts[s] == 0 {
                first[s] = v;
            } else if v != first[s] {
                constant[s] = false;
            }
            sums[s] += v;
            counts[s] += 1;
        }
    }
    (0..len)
        .map(|s| {
            if constant[s] {
                first[s]
            } else {
                sums[s] / counts[s] as f64
            }
        })
        .collect()
}

/// Stacks the Hankel matrices of each channel (row) of a multichannel
/// signal into a 3-way tensor of shape (window, shifts, channels).
pub fn hankelize_channels(x: &Matrix, window: usize) -> Result<DenseTensor> {
    if window == 0 || window > x.cols() {
        return Err(Error::invalid(format!(
            "window {window} not in 1..={} for signals of length {}",
            x.cols(),
            x.cols()
        )));
    }
    let cols = x.cols() - window + 1;
    let shape = Shape::new(vec![window, cols, x.rows()])?;
    DenseTensor::from_fn(shape, |idx| x[(idx[2], idx[0] + idx[1])])
}

/// Averages anti-diagonals of each channel slice, recovering a
/// channels-by-time matrix. Inverse of `hankelize_channels` on tensors whose
/// slices are Hankel.
pub fn dehankelize_channels(t: &DenseTensor) -> Result<Matrix> {
    if t.order() != 3 {
        return Err(Error::invalid(format!(
            "expected a 3-way tensor, got order {}",
            t.order()
        )));
    }
    let (rows, cols, channels) = (
        t.shape().dim(0),
        t.shape().dim(1),
        t.shape().dim(2),
    );
    let len = rows + cols - 1;
    let mut sums = Matrix::zeros(channels, len);
    let mut first = Matrix::zeros(channels, len);
    let mut constant = vec![true; channels * len];
    let mut counts = vec![0usize; len];
    for i in 0..rows {
        for j in 0..cols {
            let s = i + j;
            let fresh = counts[s] == 0;
            counts[s] += 1;
            for c in 0..channels {
                let v = t.get(&[i, j, c])?;
                if fresh {
                    first[(c, s)] = v;
                } else if v != first[(c, s)] {
                    constant[c * len + s] = false;
                }
                sums[(c, s)] += v;
            }
        }
    }
    let mut out = Matrix::zeros(channels, len);
    for c in 0..channels {
        for (s, &count) in counts.iter().enumerate() {
            out[(c, s)] = if constant[c * len + s] {
                first[(c, s)]
            } else {
                sums[(c, s)] / count as f64
            };
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::svd;

    #[test]
    fn hankel_layout() {
        let v: Vec<f64> = (0..6).map(|x| x as f64).collect();
        let h = hankelize(&v, 3).unwrap();
        assert_eq!(h.rows(), 3);
        assert_eq!(h.cols(), 4);
        assert_eq!(h.row(0), &[0.0, 1.0, 2.0, 3.0]);
        assert_eq!(h.row(1), &[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(h.row(2), &[2.0, 3.0, 4.0, 5.0]);
    }

    #[test]
    fn dehankelize_inverts_hankelize() {
        let v: Vec<f64> = (0..20).map(|x| (x as f64 * 0.3).sin()).collect();
        for window in [1, 2, 7, 20] {
            let h = hankelize(&v, window).unwrap();
            let back = dehankelize(&h);
            assert_eq!(back, v);
        }
    }

    #[test]
    fn dehankelize_averages_antidiagonals() {
        let m = Matrix::from_rows(&[vec![0.0, 2.0], vec![4.0, 6.0]]).unwrap();
        assert_eq!(dehankelize(&m), vec![0.0, 3.0, 6.0]);
    }

    #[test]
    fn window_bounds_are_checked() {
        let v = vec![1.0, 2.0, 3.0];
        assert!(hankelize(&v, 0).is_err());
        assert!(hankelize(&v, 4).is_err());
        assert!(hankelize(&v, 3).is_ok());
    }

    #[test]
    fn sinusoid_hankel_has_rank_two() {
        let v: Vec<f64> = (0..60).map(|t| (0.7 * t as f64).sin()).collect();
        let h = hankelize(&v, 10).unwrap();
        assert_eq!(svd(&h).unwrap().rank(), 2);
    }

    #[test]
    fn channel_tensor_roundtrip() {
        let x = Matrix::from_fn(3, 15, |c, t| ((c + 1) as f64 * 0.4 * t as f64).cos());
        let t = hankelize_channels(&x, 6).unwrap();
        assert_eq!(t.shape().dims(), &[6, 10, 3]);
        assert_eq!(t.get(&[2, 3, 1]).unwrap(), x[(1, 5)]);
        let back = dehankelize_channels(&t).unwrap();
        assert_eq!(back.rows(), 3);
        assert_eq!(back.cols(), 15);
        for c in 0..3 {
            for s in 0..15 {
                assert_eq!(back[(c, s)], x[(c, s)]);
            }
        }
    }
}
