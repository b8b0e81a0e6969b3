use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::tensor::dense::DenseTensor;
use crate::tensor::shape::Shape;

/// Default densification budget in scalars: 2 GiB of f64 values.
pub const DEFAULT_DENSIFY_BUDGET: u128 = 2 * 1024 * 1024 * 1024 / 8;

/// Environment variable that overrides the densification budget, given as a
/// scalar count.
pub const DENSIFY_BUDGET_ENV: &str = "MULTIWAY_DENSIFY_BUDGET";

/// Densification budget in scalars: the environment override when set and
/// parseable, otherwise the 2 GiB default.
pub fn densify_budget() -> u128 {
    std::env::var(DENSIFY_BUDGET_ENV)
        .ok()
        .and_then(|v| v.parse::<u128>().ok())
        .unwrap_or(DEFAULT_DENSIFY_BUDGET)
}

/// Coordinate-format sparse tensor. Entries are kept in a sorted map so
/// iteration order is deterministic, and exact zeros are never stored.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseTensor {
    shape: Shape,
    entries: BTreeMap<Vec<usize>, f64>,
}

impl SparseTensor {
    pub fn new(shape: Shape) -> Self {
        SparseTensor {
            shape,
            entries: BTreeMap::new(),
        }
    }

    pub fn shape(&self) -> &Shape {
        &self.shape
    }

    pub fn order(&self) -> usize {
        self.shape.order()
    }

    pub fn nnz(&self) -> usize {
        self.entries.len()
    }

    /// Fraction of stored entries over the total element count.
    pub fn density(&self) -> f64 {
        self.nnz() as f64 / self.shape.size() as f64
    }

    /// Stores a value at an index, overwriting any previous value. Writing an
    /// exact zero removes the entry so no explicit zeros survive.
    pub fn insert(&mut self, index: Vec<usize>, value: f64) -> Result<()> {
        if !self.shape.contains(&index) {
            return Err(Error::IndexOutOfBounds {
                index,
                shape: self.shape.to_string(),
            });
        }
        if value == 0.0 {
            self.entries.remove(&index);
        } else {
            self.entries.insert(index, value);
        }
        Ok(())
    }

    /// Value at an index; unstored entries read as zero.
    pub fn get(&self, index: &[usize]) -> Result<f64> {
        if !self.shape.contains(index) {
            return Err(Error::IndexOutOfBounds {
                index: index.to_vec(),
                shape: self.shape.to_string(),
            });
        }
        Ok(self.entries.get(index).copied().unwrap_or(0.0))
    }

    pub fn contains(&self, index: &[usize]) -> bool {
        self.entries.contains_key(index)
    }

    /// Entries in sorted index order.
    pub fn iter(&self) -> impl Iterator<Item = (&[usize], f64)> {
        self.entries.iter().map(|(k, &v)| (k.as_slice(), v))
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.entries.values().map(|&v| v * v).sum::<f64>().sqrt()
    }

    /// Sparsifies a dense tensor, dropping entries with |value| <= tol.
    pub fn from_dense(t: &DenseTensor, tol: f64) -> Self {
        let mut s = SparseTensor::new(t.shape().clone());
        let shape = t.shape().clone();
        for (off, &v) in t.data().iter().enumerate() {
            if v.abs() > tol && v != 0.0 {
                s.entries.insert(shape.index_of(off), v);
            }
        }
        s
    }

    /// Materializes the tensor densely, refusing when the element count
    /// exceeds `budget` scalars.
    pub fn to_dense(&self, budget: u128) -> Result<DenseTensor> {
        let size = self.shape.size();
        if size > budget {
            return Err(Error::BudgetExceeded { size, budget });
        }
        let mut t = DenseTensor::zeros(self.shape.clone())?;
        let shape = self.shape.clone();
        for (idx, v) in self.iter() {
            let off = shape.offset(idx)?;
            t.data_mut()[off] = v;
        }
        Ok(t)
    }
}
