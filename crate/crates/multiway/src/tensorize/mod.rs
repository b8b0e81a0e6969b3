//! Turning flat records and signals into tensors: pivot-table tensorization
//! of tabular data with per-column key mappings, axis quantization,
//! vector segmentation, Hankelization, and moment/cumulant statistics.

mod hankel;
mod stats;
mod table;

pub use hankel::{dehankelize, dehankelize_channels, hankelize, hankelize_channels};
pub use stats::{
    central_moment, cumulant_tensor, higher_order_covariance, lagged_covariance, CumulantOrder,
};
pub use table::{
    tensorize_table, Aggregation, AxisMap, AxisSpec, KeyMapping, Table, TensorizePlan,
    TensorizedTable,
};

use crate::error::{Error, Result};
use crate::tensor::{DenseTensor, Shape, SparseTensor};

/// Merges runs of `bin_size` adjacent indices along one mode. Index `i`
/// lands in bin `(i + offset) / bin_size`, so the new extent is
/// `ceil((extent + offset) / bin_size)`; a nonzero offset shifts the bin
/// boundaries, e.g. to align month indices to calendar years.
pub fn quantize(
    t: &SparseTensor,
    mode: usize,
    bin_size: usize,
    offset: usize,
    agg: Aggregation,
) -> Result<SparseTensor> {
    t.shape().check_mode(mode)?;
    if bin_size == 0 {
        return Err(Error::invalid("bin size must be at least 1"));
    }
    if offset >= bin_size {
        return Err(Error::invalid(format!(
            "offset {offset} must be smaller than bin size {bin_size}"
        )));
    }
    let mut dims = t.shape().dims().to_vec();
    dims[mode] = (dims[mode] + offset).div_ceil(bin_size);
    let shape = Shape::new(dims)?;

    let mut cells: std::collections::BTreeMap<Vec<usize>, (f64, usize, f64)> =
        std::collections::BTreeMap::new();
    for (idx, v) in t.iter() {
        let mut key = idx.to_vec();
        key[mode] = (key[mode] + offset) / bin_size;
        let cell = cells.entry(key).or_insert((0.0, 0, 0.0));
        cell.0 += v;
        cell.1 += 1;
        cell.2 = v;
    }

    let mut out = SparseTensor::new(shape);
    for (idx, (sum, count, last)) in cells {
        let value = match agg {
            Aggregation::Mean => sum / count as f64,
            Aggregation::Sum => sum,
            Aggregation::Last => last,
            Aggregation::Count => count as f64,
        };
        out.insert(idx, value)?;
    }
    Ok(out)
}

/// Reshapes a flat signal into a dense tensor of the given extents; the
/// element count must match exactly.
pub fn segment(v: &[f64], dims: &[usize]) -> Result<DenseTensor> {
    let shape = Shape::new(dims.to_vec())?;
    if shape.size() != v.len() as u128 {
        return Err(Error::invalid(format!(
            "cannot segment {} samples into shape {shape} ({} elements)",
            v.len(),
            shape.size()
        )));
    }
    DenseTensor::from_data(shape, v.to_vec())
}

/// Inverse of `segment`: the canonical row-major flattening.
pub fn desegment(t: &DenseTensor) -> Vec<f64> {
    t.data().to_vec()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn monthly_tensor(months: usize) -> SparseTensor {
        let mut s = SparseTensor::new(Shape::new(vec![2, months]).unwrap());
        for m in 0..months {
            s.insert(vec![0, m], 1.0 + (m % 12) as f64).unwrap();
        }
        s
    }

    #[test]
    fn quantize_extent_without_offset() {
        let t = monthly_tensor(3239);
        let q = quantize(&t, 1, 12, 0, Aggregation::Mean).unwrap();
        assert_eq!(q.shape().dims(), &[2, 270]);
    }

    #[test]
    fn quantize_extent_with_calendar_offset() {
        // A monthly axis that starts mid-year needs an offset to make bins
        // coincide with calendar years: 3239 months offset by 10 span 271.
        let t = monthly_tensor(3239);
        let q = quantize(&t, 1, 12, 10, Aggregation::Mean).unwrap();
        assert_eq!(q.shape().dims(), &[2, 271]);
    }

    #[test]
    fn quantize_mean_sums_and_counts() {
        let mut t = SparseTensor::new(Shape::new(vec![10]).unwrap());
        t.insert(vec![0], 2.0).unwrap();
        t.insert(vec![1], 4.0).unwrap();
        t.insert(vec![5], 7.0).unwrap();
        let mean = quantize(&t, 0, 5, 0, Aggregation::Mean).unwrap();
        assert_eq!(mean.shape().dims(), &[2]);
        assert_eq!(mean.get(&[0]).unwrap(), 3.0);
        assert_eq!(mean.get(&[1]).unwrap(), 7.0);
        let sum = quantize(&t, 0, 5, 0, Aggregation::Sum).unwrap();
        assert_eq!(sum.get(&[0]).unwrap(), 6.0);
        let count = quantize(&t, 0, 5, 0, Aggregation::Count).unwrap();
        assert_eq!(count.get(&[0]).unwrap(), 2.0);
        assert_eq!(count.get(&[1]).unwrap(), 1.0);
    }

    #[test]
    fn quantize_offset_must_stay_below_bin() {
        let t = monthly_tensor(24);
        assert!(quantize(&t, 1, 12, 12, Aggregation::Mean).is_err());
        assert!(quantize(&t, 1, 0, 0, Aggregation::Mean).is_err());
        assert!(quantize(&t, 5, 12, 0, Aggregation::Mean).is_err());
    }

    #[test]
    fn segment_roundtrip() {
        let v: Vec<f64> = (0..24).map(|x| x as f64).collect();
        let t = segment(&v, &[2, 3, 4]).unwrap();
        assert_eq!(t.get(&[1, 2, 3]).unwrap(), 23.0);
        assert_eq!(t.get(&[0, 1, 2]).unwrap(), 6.0);
        assert_eq!(desegment(&t), v);
    }

    #[test]
    fn segment_rejects_size_mismatch() {
        let v = vec![0.0; 10];
        assert!(segment(&v, &[3, 4]).is_err());
    }
}
