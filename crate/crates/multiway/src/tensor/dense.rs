use crate::error::{Error, Result};
use crate::tensor::matrix::Matrix;
use crate::tensor::shape::Shape;

/// Dense N-way tensor stored in canonical row-major order: the last index
/// varies fastest in memory.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseTensor {
    shape: Shape,
    data: Vec<f64>,
}

/// Walks the multi-indices of `shape` in row-major order alongside their
/// linear offsets.
pub(crate) fn for_each_index(shape: &Shape, mut f: impl FnMut(usize, &[usize])) {
    let dims = shape.dims();
    let mut idx = vec![0usize; dims.len()];
    let len = shape.size() as usize;
    for off in 0..len {
        f(off, &idx);
        for k in (0..dims.len()).rev() {
            idx[k] += 1;
            if idx[k] < dims[k] {
                break;
            }
            idx[k] = 0;
        }
    }
}

impl DenseTensor {
    pub fn zeros(shape: Shape) -> Result<Self> {
        let len = shape.dense_len()?;
        Ok(DenseTensor {
            shape,
            data: vec![0.0; len],
        })
    }

    pub fn from_data(shape: Shape, data: Vec<f64>) -> Result<Self> {
        let len = shape.dense_len()?;
        if data.len() != len {
            return Err(Error::invalid(format!(
                "data length {} does not match shape {} ({} elements)",
                data.len(),
                shape,
                len
            )));
        }
        Ok(DenseTensor { shape, data })
    }

    pub fn from_fn(shape: Shape, mut f: impl FnMut(&[usize]) -> f64) -> Result<Self> {
        let mut t = DenseTensor::zeros(shape)?;
        let shape = t.shape.clone();
        for_each_index(&shape, |off, idx| t.data[off] = f(idx));
        Ok(t)
    }

    pub fn scalar(value: f64) -> Self {
        DenseTensor {
            shape: Shape::new(vec![1]).unwrap(),
            data: vec![value],
        }
    }

    pub fn shape(&self) -> &Shape {
        &self.shape
    }

    pub fn order(&self) -> usize {
        self.shape.order()
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    pub fn get(&self, index: &[usize]) -> Result<f64> {
        Ok(self.data[self.shape.offset(index)?])
    }

    pub fn set(&mut self, index: &[usize], value: f64) -> Result<()> {
        let off = self.shape.offset(index)?;
        self.data[off] = value;
        Ok(())
    }

    /// Reinterprets the same row-major buffer under a new shape with the same
    /// element count.
    pub fn reshape(self, shape: Shape) -> Result<Self> {
        if shape.size() != self.shape.size() {
            return Err(Error::ShapeMismatch {
                expected: format!("{} elements", self.shape.size()),
                got: format!("{} ({} elements)", shape, shape.size()),
            });
        }
        Ok(DenseTensor {
            shape,
            data: self.data,
        })
    }

    /// Mode-n unfolding. Row r holds all elements whose n-th index is r; the
    /// column index orders the remaining modes with the lowest-numbered one
    /// varying fastest.
    pub fn unfold(&self, mode: usize) -> Result<Matrix> {
        self.shape.check_mode(mode)?;
        let dims = self.shape.dims();
        let n_rows = dims[mode];
        let n_cols = self.data.len() / n_rows;
        let col_strides = unfold_col_strides(dims, mode);
        let mut m = Matrix::zeros(n_rows, n_cols);
        for_each_index(&self.shape, |off, idx| {
            let mut col = 0usize;
            for (k, &i) in idx.iter().enumerate() {
                if k != mode {
                    col += i * col_strides[k];
                }
            }
            m[(idx[mode], col)] = self.data[off];
        });
        Ok(m)
    }

    /// Inverse of `unfold`: rebuilds the tensor of `shape` from its mode-n
    /// unfolding.
    pub fn fold(m: &Matrix, mode: usize, shape: Shape) -> Result<Self> {
        shape.check_mode(mode)?;
        let dims = shape.dims();
        let expected_cols = shape.dense_len()? / dims[mode];
        if m.rows() != dims[mode] || m.cols() != expected_cols {
            return Err(Error::ShapeMismatch {
                expected: format!("{}x{}", dims[mode], expected_cols),
                got: format!("{}x{}", m.rows(), m.cols()),
            });
        }
        let col_strides = unfold_col_strides(dims, mode);
        let mut t = DenseTensor::zeros(shape)?;
        let shape = t.shape.clone();
        for_each_index(&shape, |off, idx| {
            let mut col = 0usize;
            for (k, &i) in idx.iter().enumerate() {
                if k != mode {
                    col += i * col_strides[k];
                }
            }
            t.data[off] = m[(idx[mode], col)];
        });
        Ok(t)
    }

    /// Mode-n product with a matrix: contracts the n-th mode against the
    /// columns of `m`, replacing its extent with `m.rows()`.
    pub fn mode_n_product(&self, m: &Matrix, mode: usize) -> Result<Self> {
        self.shape.check_mode(mode)?;
        if m.cols() != self.shape.dim(mode) {
            return Err(Error::ShapeMismatch {
                expected: format!("*x{}", self.shape.dim(mode)),
                got: format!("{}x{}", m.rows(), m.cols()),
            });
        }
        let unfolded = self.unfold(mode)?;
        let product = m.matmul(&unfolded)?;
        let mut dims = self.shape.dims().to_vec();
        dims[mode] = m.rows();
        DenseTensor::fold(&product, mode, Shape::new(dims)?)
    }

    /// Outer product of N vectors, giving an order-N tensor.
    pub fn outer_product(vectors: &[Vec<f64>]) -> Result<Self> {
        if vectors.is_empty() {
            return Err(Error::invalid("outer product needs at least one vector"));
        }
        let dims: Vec<usize> = vectors.iter().map(|v| v.len()).collect();
        let mut t = DenseTensor::zeros(Shape::new(dims)?)?;
        let shape = t.shape.clone();
        for_each_index(&shape, |off, idx| {
            t.data[off] = idx.iter().zip(vectors).map(|(&i, v)| v[i]).product();
        });
        Ok(t)
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|&x| x * x).sum::<f64>().sqrt()
    }

    pub fn inner_product(&self, other: &DenseTensor) -> Result<f64> {
        self.check_same_shape(other)?;
        Ok(self
            .data
            .iter()
            .zip(&other.data)
            .map(|(&a, &b)| a * b)
            .sum())
    }

    pub fn hadamard(&self, other: &DenseTensor) -> Result<Self> {
        self.check_same_shape(other)?;
        let data = self
            .data
            .iter()
            .zip(&other.data)
            .map(|(&a, &b)| a * b)
            .collect();
        Ok(DenseTensor {
            shape: self.shape.clone(),
            data,
        })
    }

    pub fn add(&self, other: &DenseTensor) -> Result<Self> {
        self.check_same_shape(other)?;
        let data = self
            .data
            .iter()
            .zip(&other.data)
            .map(|(&a, &b)| a + b)
            .collect();
        Ok(DenseTensor {
            shape: self.shape.clone(),
            data,
        })
    }

    pub fn sub(&self, other: &DenseTensor) -> Result<Self> {
        self.check_same_shape(other)?;
        let data = self
            .data
            .iter()
            .zip(&other.data)
            .map(|(&a, &b)| a - b)
            .collect();
        Ok(DenseTensor {
            shape: self.shape.clone(),
            data,
        })
    }

    pub fn scale(&mut self, s: f64) {
        for x in &mut self.data {
            *x *= s;
        }
    }

    pub fn max_abs_diff(&self, other: &DenseTensor) -> Result<f64> {
        self.check_same_shape(other)?;
        Ok(self
            .data
            .iter()
            .zip(&other.data)
            .map(|(&a, &b)| (a - b).abs())
            .fold(0.0, f64::max))
    }

    fn check_same_shape(&self, other: &DenseTensor) -> Result<()> {
        if self.shape != other.shape {
            return Err(Error::ShapeMismatch {
                expected: self.shape.to_string(),
                got: other.shape.to_string(),
            });
        }
        Ok(())
    }
}

/// Column strides of the mode-n unfolding: among the non-mode indices the
/// lowest-numbered one varies fastest.
fn unfold_col_strides(dims: &[usize], mode: usize) -> Vec<usize> {
    let mut strides = vec![0usize; dims.len()];
    let mut acc = 1usize;
    for (k, &d) in dims.iter().enumerate() {
        if k == mode {
            continue;
        }
        strides[k] = acc;
        acc *= d;
    }
    strides
}

/// A 2-way tensor and a matrix describe the same object; these conversions
/// move between the two representations without reordering data.
impl DenseTensor {
    pub fn from_matrix(m: &Matrix) -> Self {
        DenseTensor {
            shape: Shape::new(vec![m.rows(), m.cols()]).unwrap(),
            data: m.data().to_vec(),
        }
    }

    pub fn to_matrix(&self) -> Result<Matrix> {
        if self.order() != 2 {
            return Err(Error::invalid(format!(
                "expected a 2-way tensor, got order {}",
                self.order()
            )));
        }
        Matrix::from_vec(self.shape.dim(0), self.shape.dim(1), self.data.clone())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cube() -> DenseTensor {
        // t[i,j,k] = 4i + 2j + k, i.e. the linear offset itself.
        DenseTensor::from_fn(Shape::new(vec![2, 2, 2]).unwrap(), |idx| {
            (4 * idx[0] + 2 * idx[1] + idx[2]) as f64
        })
        .unwrap()
    }

    #[test]
    fn unfold_mode0_ordering() {
        let m = cube().unfold(0).unwrap();
        assert_eq!(m.row(0), &[0.0, 2.0, 1.0, 3.0]);
        assert_eq!(m.row(1), &[4.0, 6.0, 5.0, 7.0]);
    }

    #[test]
    fn unfold_mode1_ordering() {
        let m = cube().unfold(1).unwrap();
        assert_eq!(m.row(0), &[0.0, 4.0, 1.0, 5.0]);
        assert_eq!(m.row(1), &[2.0, 6.0, 3.0, 7.0]);
    }

    #[test]
    fn unfold_mode2_ordering() {
        let m = cube().unfold(2).unwrap();
        assert_eq!(m.row(0), &[0.0, 4.0, 2.0, 6.0]);
        assert_eq!(m.row(1), &[1.0, 5.0, 3.0, 7.0]);
    }

    #[test]
    fn fold_inverts_unfold() {
        let t = DenseTensor::from_fn(Shape::new(vec![3, 4, 2, 5]).unwrap(), |idx| {
            (idx[0] * 1000 + idx[1] * 100 + idx[2] * 10 + idx[3]) as f64
        })
        .unwrap();
        for mode in 0..4 {
            let back =
                DenseTensor::fold(&t.unfold(mode).unwrap(), mode, t.shape().clone()).unwrap();
            assert_eq!(back, t);
        }
    }

    #[test]
    fn mode_product_matches_elementwise_contraction() {
        let t = cube();
        let m = Matrix::from_rows(&[vec![1.0, 2.0], vec![3.0, 4.0], vec![5.0, 6.0]]).unwrap();
        let p = t.mode_n_product(&m, 1).unwrap();
        assert_eq!(p.shape().dims(), &[2, 3, 2]);
        for i in 0..2 {
            for r in 0..3 {
                for k in 0..2 {
                    let expected: f64 = (0..2)
                        .map(|j| m[(r, j)] * t.get(&[i, j, k]).unwrap())
                        .sum();
                    assert!((p.get(&[i, r, k]).unwrap() - expected).abs() < 1e-14);
                }
            }
        }
    }

    #[test]
    fn outer_product_rank_one() {
        let t = DenseTensor::outer_product(&[vec![1.0, 2.0], vec![3.0, 5.0], vec![7.0, 11.0]])
            .unwrap();
        assert_eq!(t.get(&[1, 1, 1]).unwrap(), 2.0 * 5.0 * 11.0);
        assert_eq!(t.get(&[0, 1, 0]).unwrap(), 1.0 * 5.0 * 7.0);
    }

    #[test]
    fn inner_product_consistent_with_norm() {
        let t = cube();
        let ip = t.inner_product(&t).unwrap();
        assert!((ip.sqrt() - t.frobenius_norm()).abs() < 1e-12);
    }

    #[test]
    fn matrix_roundtrip_preserves_layout() {
        let m = Matrix::from_fn(3, 4, |i, j| (i * 4 + j) as f64);
        let t = DenseTensor::from_matrix(&m);
        assert_eq!(t.get(&[2, 1]).unwrap(), 9.0);
        assert_eq!(t.to_matrix().unwrap(), m);
    }
}
