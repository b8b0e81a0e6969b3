use std::fmt;

use crate::error::{Error, Result};

/// Extents of an N-way tensor. Every mode has extent >= 1 and the total
/// element count is tracked as a u128 so that shapes far beyond addressable
/// memory can still be described, compared, and reported.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Shape {
    dims: Vec<usize>,
}

impl Shape {
    pub fn new(dims: Vec<usize>) -> Result<Self> {
        if dims.is_empty() {
            return Err(Error::invalid("shape must have at least one mode"));
        }
        if dims.iter().any(|&d| d == 0) {
            return Err(Error::invalid(format!(
                "every mode extent must be positive, got {dims:?}"
            )));
        }
        let mut size: u128 = 1;
        for &d in &dims {
            size = size
                .checked_mul(d as u128)
                .ok_or_else(|| Error::invalid("shape size overflows u128"))?;
        }
        Ok(Shape { dims })
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn order(&self) -> usize {
        self.dims.len()
    }

    pub fn dim(&self, mode: usize) -> usize {
        self.dims[mode]
    }

    /// Total number of elements as a wide integer; never overflows for a
    /// constructed shape.
    pub fn size(&self) -> u128 {
        self.dims.iter().map(|&d| d as u128).product()
    }

    /// Element count as a usize, for shapes small enough to hold densely.
    pub fn dense_len(&self) -> Result<usize> {
        usize::try_from(self.size()).map_err(|_| Error::BudgetExceeded {
            size: self.size(),
            budget: usize::MAX as u128,
        })
    }

    pub fn check_mode(&self, mode: usize) -> Result<()> {
        if mode >= self.order() {
            return Err(Error::ModeOutOfRange {
                mode,
                order: self.order(),
            });
        }
        Ok(())
    }

    pub fn contains(&self, index: &[usize]) -> bool {
        index.len() == self.order() && index.iter().zip(&self.dims).all(|(&i, &d)| i < d)
    }

    /// Row-major strides: the last index varies fastest.
    pub fn strides(&self) -> Vec<usize> {
        let mut strides = vec![1usize; self.order()];
        for k in (0..self.order().saturating_sub(1)).rev() {
            strides[k] = strides[k + 1] * self.dims[k + 1];
        }
        strides
    }

    /// Linear offset of a multi-index in canonical row-major order.
    pub fn offset(&self, index: &[usize]) -> Result<usize> {
        if !self.contains(index) {
            return Err(Error::IndexOutOfBounds {
                index: index.to_vec(),
                shape: self.to_string(),
            });
        }
        let mut off = 0usize;
        for (&i, &d) in index.iter().zip(&self.dims) {
            off = off * d + i;
        }
        Ok(off)
    }

    /// Multi-index of a linear offset; inverse of `offset`.
    pub fn index_of(&self, mut offset: usize) -> Vec<usize> {
        let mut index = vec![0usize; self.order()];
        for k in (0..self.order()).rev() {
            index[k] = offset % self.dims[k];
            offset /= self.dims[k];
        }
        index
    }
}

impl fmt::Display for Shape {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.dims.iter().map(|d| d.to_string()).collect();
        write!(f, "{}", parts.join("x"))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_zero_extent() {
        assert!(Shape::new(vec![2, 0, 3]).is_err());
        assert!(Shape::new(vec![]).is_err());
    }

    #[test]
    fn size_is_wide() {
        let s = Shape::new(vec![100, 99, 272, 3239]).unwrap();
        assert_eq!(s.size(), 8_721_979_200u128);
    }

    #[test]
    fn offset_roundtrip() {
        let s = Shape::new(vec![2, 5, 40, 3, 975]).unwrap();
        assert_eq!(s.size(), 1_170_000u128);
        for off in [0usize, 1, 974, 975, 1_169_999, 123_456] {
            assert_eq!(s.offset(&s.index_of(off)).unwrap(), off);
        }
    }

    #[test]
    fn last_index_fastest() {
        let s = Shape::new(vec![2, 3, 4]).unwrap();
        assert_eq!(s.strides(), vec![12, 4, 1]);
        assert_eq!(s.offset(&[0, 0, 1]).unwrap(), 1);
        assert_eq!(s.offset(&[0, 1, 0]).unwrap(), 4);
        assert_eq!(s.offset(&[1, 0, 0]).unwrap(), 12);
    }

    #[test]
    fn out_of_bounds_is_reported() {
        let s = Shape::new(vec![2, 2]).unwrap();
        assert!(s.offset(&[2, 0]).is_err());
        assert!(s.offset(&[0, 0, 0]).is_err());
    }
}
