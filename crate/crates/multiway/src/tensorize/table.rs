use std::collections::{BTreeMap, BTreeSet};

use crate::error::{Error, Result};
use crate::tensor::{Shape, SparseTensor};

/// In-memory tabular data: named columns and string-valued rows.
#[derive(Debug, Clone)]
pub struct Table {
    headers: Vec<String>,
    rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(headers: Vec<String>, rows: Vec<Vec<String>>) -> Result<Self> {
        if headers.is_empty() {
            return Err(Error::invalid("a table needs at least one column"));
        }
        for (i, row) in rows.iter().enumerate() {
            if row.len() != headers.len() {
                return Err(Error::invalid(format!(
                    "row {} has {} fields, expected {}",
                    i + 1,
                    row.len(),
                    headers.len()
                )));
            }
        }
        Ok(Table { headers, rows })
    }

    pub fn headers(&self) -> &[String] {
        &self.headers
    }

    pub fn rows(&self) -> &[Vec<String>] {
        &self.rows
    }

    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.headers.iter().position(|h| h == name)
    }
}

/// How a coordinate column's string keys become 0-based indices.
#[derive(Debug, Clone, PartialEq)]
pub enum KeyMapping {
    /// Keys are nonnegative integers used as indices directly; the extent is
    /// the largest key plus one.
    Integer,
    /// Distinct keys are enumerated in sorted order: numerically when every
    /// key parses as a finite number, lexicographically otherwise.
    Distinct,
    /// Numeric keys fall into equal-width bins: `floor((x - origin) / width)`.
    Bin { width: f64, origin: f64 },
}

/// How multiple rows landing in the same cell combine.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Aggregation {
    Mean,
    Sum,
    Last,
    Count,
}

impl Aggregation {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "mean" => Ok(Aggregation::Mean),
            "sum" => Ok(Aggregation::Sum),
            "last" => Ok(Aggregation::Last),
            "count" => Ok(Aggregation::Count),
            other => Err(Error::invalid(format!(
                "unknown aggregation {other:?}; expected mean, sum, last, or count"
            ))),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Aggregation::Mean => "mean",
            Aggregation::Sum => "sum",
            Aggregation::Last => "last",
            Aggregation::Count => "count",
        }
    }
}

/// One tensor mode: the table column that feeds it and its key mapping.
#[derive(Debug, Clone)]
pub struct AxisSpec {
    pub column: String,
    pub mapping: KeyMapping,
}

/// Recipe for pivoting a table into a sparse tensor.
#[derive(Debug, Clone)]
pub struct TensorizePlan {
    pub axes: Vec<AxisSpec>,
    pub value_column: String,
    pub aggregation: Aggregation,
}

/// Bidirectional key-to-index mapping for one mode.
#[derive(Debug, Clone)]
pub struct AxisMap {
    keys: Vec<String>,
    index: BTreeMap<String, usize>,
}

impl AxisMap {
    fn new(keys: Vec<String>) -> Self {
        let index = keys
            .iter()
            .enumerate()
            .map(|(i, k)| (k.clone(), i))
            .collect();
        AxisMap { keys, index }
    }

    pub fn extent(&self) -> usize {
        self.keys.len()
    }

    pub fn keys(&self) -> &[String] {
        &self.keys
    }

    pub fn key(&self, index: usize) -> Option<&str> {
        self.keys.get(index).map(String::as_str)
    }

    pub fn lookup(&self, key: &str) -> Option<usize> {
        self.index.get(key).copied()
    }
}

/// Result of tensorizing a table: the sparse tensor, one axis map per mode,
/// and bookkeeping about merged and skipped rows.
#[derive(Debug, Clone)]
pub struct TensorizedTable {
    pub tensor: SparseTensor,
    pub axis_maps: Vec<AxisMap>,
    /// Rows that landed in an already-populated cell.
    pub collisions: usize,
    /// Rows skipped for an empty value field.
    pub skipped_rows: usize,
}

fn parse_finite(s: &str, row: usize, column: &str) -> Result<f64> {
    let v: f64 = s
        .trim()
        .parse()
        .map_err(|_| Error::parse("<table>", row, format!("column {column:?}: {s:?} is not a number")))?;
    if !v.is_finite() {
        return Err(Error::parse(
            "<table>",
            row,
            format!("column {column:?}: {s:?} is not finite"),
        ));
    }
    Ok(v)
}

/// Shortest decimal label for a bin edge.
fn edge_label(x: f64) -> String {
    format!("{x}")
}

struct AxisBuilder<'a> {
    spec: &'a AxisSpec,
    col: usize,
    /// For Integer and Bin mappings: largest index seen.
    max_index: usize,
    seen_any: bool,
    /// For Distinct mapping: the key set.
    distinct: BTreeSet<String>,
}

impl AxisBuilder<'_> {
    fn observe(&mut self, raw: &str, row: usize) -> Result<()> {
        match &self.spec.mapping {
            KeyMapping::Integer => {
                let key: usize = raw.trim().parse().map_err(|_| {
                    Error::parse(
                        "<table>",
                        row,
                        format!(
                            "column {:?}: {raw:?} is not a nonnegative integer",
                            self.spec.column
                        ),
                    )
                })?;
                self.max_index = self.max_index.max(key);
                self.seen_any = true;
            }
            KeyMapping::Distinct => {
                self.distinct.insert(raw.to_string());
            }
            KeyMapping::Bin { width, origin } => {
                let x = parse_finite(raw, row, &self.spec.column)?;
                let bin = ((x - origin) / width).floor();
                if bin < 0.0 {
                    return Err(Error::parse(
                        "<table>",
                        row,
                        format!(
                            "column {:?}: value {raw:?} falls below the bin origin {origin}",
                            self.spec.column
                        ),
                    ));
                }
                self.max_index = self.max_index.max(bin as usize);
                self.seen_any = true;
            }
        }
        Ok(())
    }

    fn finish(&self) -> Result<AxisMap> {
        match &self.spec.mapping {
            KeyMapping::Integer => {
                if !self.seen_any {
                    return Err(Error::invalid(format!(
                        "column {:?} has no usable rows",
                        self.spec.column
                    )));
                }
                let keys = (0..=self.max_index).map(|i| i.to_string()).collect();
                Ok(AxisMap::new(keys))
            }
            KeyMapping::Distinct => {
                if self.distinct.is_empty() {
                    return Err(Error::invalid(format!(
                        "column {:?} has no usable rows",
                        self.spec.column
                    )));
                }
                let mut keys: Vec<String> = self.distinct.iter().cloned().collect();
                let numeric: Option<Vec<f64>> = keys
                    .iter()
                    .map(|k| k.trim().parse::<f64>().ok().filter(|v| v.is_finite()))
                    .collect();
                if let Some(values) = numeric {
                    let mut pairs: Vec<(f64, String)> =
                        values.into_iter().zip(keys).collect();
                    pairs.sort_by(|a, b| {
                        a.0.partial_cmp(&b.0).unwrap().then_with(|| a.1.cmp(&b.1))
                    });
                    keys = pairs.into_iter().map(|(_, k)| k).collect();
                }
                Ok(AxisMap::new(keys))
            }
            KeyMapping::Bin { width, origin } => {
                if !self.seen_any {
                    return Err(Error::invalid(format!(
                        "column {:?} has no usable rows",
                        self.spec.column
                    )));
                }
                let keys = (0..=self.max_index)
                    .map(|i| edge_label(origin + i as f64 * width))
                    .collect();
                Ok(AxisMap::new(keys))
            }
        }
    }

    fn index_of(&self, map: &AxisMap, raw: &str) -> usize {
        match &self.spec.mapping {
            KeyMapping::Integer => raw.trim().parse().unwrap(),
            KeyMapping::Distinct => map.lookup(raw).unwrap(),
            KeyMapping::Bin { width, origin } => {
                let x: f64 = raw.trim().parse().unwrap();
                ((x - origin) / width).floor() as usize
            }
        }
    }
}

/// Pivots a table into a sparse tensor. The first pass establishes each
/// mode's extent and key mapping; the second fills cells, combining
/// colliding rows with the plan's aggregation. Rows with an empty value
/// field are skipped and counted. Cells whose aggregate is exactly zero
/// vanish, like any explicit zero in a sparse tensor.
pub fn tensorize_table(table: &Table, plan: &TensorizePlan) -> Result<TensorizedTable> {
    if plan.axes.is_empty() {
        return Err(Error::invalid("a tensorize plan needs at least one axis"));
    }
    let mut seen = BTreeSet::new();
    for axis in &plan.axes {
        if !seen.insert(axis.column.as_str()) {
            return Err(Error::invalid(format!(
                "column {:?} is used by more than one axis",
                axis.column
            )));
        }
        if let KeyMapping::Bin { width, .. } = axis.mapping {
            if !(width > 0.0) || !width.is_finite() {
                return Err(Error::invalid(format!(
                    "column {:?}: bin width must be positive and finite",
                    axis.column
                )));
            }
        }
    }
    if seen.contains(plan.value_column.as_str()) {
        return Err(Error::invalid(format!(
            "value column {:?} cannot also be an axis",
            plan.value_column
        )));
    }
    let value_col = table.column_index(&plan.value_column).ok_or_else(|| {
        Error::invalid(format!("value column {:?} not found", plan.value_column))
    })?;

    let mut builders: Vec<AxisBuilder> = plan
        .axes
        .iter()
        .map(|spec| {
            let col = table.column_index(&spec.column).ok_or_else(|| {
                Error::invalid(format!("axis column {:?} not found", spec.column))
            })?;
            Ok(AxisBuilder {
                spec,
                col,
                max_index: 0,
                seen_any: false,
                distinct: BTreeSet::new(),
            })
        })
        .collect::<Result<Vec<_>>>()?;

    // Pass 1: axis extents. Rows skipped for an empty value field do not
    // contribute keys either.
    let mut skipped_rows = 0usize;
    for (r, row) in table.rows().iter().enumerate() {
        let line = r + 2;
        if row[value_col].trim().is_empty() {
            skipped_rows += 1;
            continue;
        }
        parse_finite(&row[value_col], line, &plan.value_column)?;
        for b in builders.iter_mut() {
            b.observe(&row[b.col], line)?;
        }
    }

    let axis_maps: Vec<AxisMap> = builders
        .iter()
        .map(AxisBuilder::finish)
        .collect::<Result<Vec<_>>>()?;
    let dims: Vec<usize> = axis_maps.iter().map(AxisMap::extent).collect();
    let shape = Shape::new(dims)?;

    // Pass 2: fill cells.
    let mut cells: BTreeMap<Vec<usize>, (f64, usize, f64)> = BTreeMap::new();
    let mut collisions = 0usize;
    for row in table.rows() {
        if row[value_col].trim().is_empty() {
            continue;
        }
        let value: f64 = row[value_col].trim().parse().unwrap();
        let index: Vec<usize> = builders
            .iter()
            .zip(&axis_maps)
            .map(|(b, map)| b.index_of(map, &row[b.col]))
            .collect();
        match cells.get_mut(&index) {
            Some(cell) => {
                collisions += 1;
                cell.0 += value;
                cell.1 += 1;
                cell.2 = value;
            }
            None => {
                cells.insert(index, (value, 1, value));
            }
        }
    }

    let mut tensor = SparseTensor::new(shape);
    for (index, (sum, count, last)) in cells {
        let v = match plan.aggregation {
            Aggregation::Mean => sum / count as f64,
            Aggregation::Sum => sum,
            Aggregation::Last => last,
            Aggregation::Count => count as f64,
        };
        tensor.insert(index, v)?;
    }

    Ok(TensorizedTable {
        tensor,
        axis_maps,
        collisions,
        skipped_rows,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn wage_like_table() -> Table {
        let headers = vec!["gender", "year", "region", "wage"];
        let rows = vec![
            vec!["F", "2001", "north", "10.0"],
            vec!["M", "2000", "south", "12.0"],
            vec!["F", "2000", "north", "8.0"],
            vec!["F", "2000", "north", "10.0"],
            vec!["M", "2001", "east", ""],
            vec!["M", "2001", "east", "9.5"],
        ];
        Table::new(
            headers.into_iter().map(String::from).collect(),
            rows.into_iter()
                .map(|r| r.into_iter().map(String::from).collect())
                .collect(),
        )
        .unwrap()
    }

    fn distinct_axis(column: &str) -> AxisSpec {
        AxisSpec {
            column: column.to_string(),
            mapping: KeyMapping::Distinct,
        }
    }

    #[test]
    fn pivot_counts_cells_collisions_and_skips() {
        let table = wage_like_table();
        let plan = TensorizePlan {
            axes: vec![
                distinct_axis("gender"),
                distinct_axis("year"),
                distinct_axis("region"),
            ],
            value_column: "wage".to_string(),
            aggregation: Aggregation::Mean,
        };
        let out = tensorize_table(&table, &plan).unwrap();
        assert_eq!(out.tensor.shape().dims(), &[2, 2, 3]);
        assert_eq!(out.tensor.nnz(), 4);
        assert_eq!(out.collisions, 1);
        assert_eq!(out.skipped_rows, 1);
        // Colliding rows (F, 2000, north) average to 9.
        let g = out.axis_maps[0].lookup("F").unwrap();
        let y = out.axis_maps[1].lookup("2000").unwrap();
        let r = out.axis_maps[2].lookup("north").unwrap();
        assert_eq!(out.tensor.get(&[g, y, r]).unwrap(), 9.0);
    }

    #[test]
    fn numeric_keys_sort_numerically() {
        let table = Table::new(
            vec!["id".into(), "v".into()],
            vec![
                vec!["10".into(), "1.0".into()],
                vec!["9".into(), "2.0".into()],
                vec!["100".into(), "3.0".into()],
            ],
        )
        .unwrap();
        let plan = TensorizePlan {
            axes: vec![distinct_axis("id")],
            value_column: "v".to_string(),
            aggregation: Aggregation::Sum,
        };
        let out = tensorize_table(&table, &plan).unwrap();
        assert_eq!(out.axis_maps[0].keys(), &["9", "10", "100"]);
    }

    #[test]
    fn non_numeric_keys_sort_lexicographically() {
        let table = Table::new(
            vec!["k".into(), "v".into()],
            vec![
                vec!["beta".into(), "1".into()],
                vec!["alpha".into(), "2".into()],
                vec!["10".into(), "3".into()],
            ],
        )
        .unwrap();
        let plan = TensorizePlan {
            axes: vec![distinct_axis("k")],
            value_column: "v".to_string(),
            aggregation: Aggregation::Sum,
        };
        let out = tensorize_table(&table, &plan).unwrap();
        assert_eq!(out.axis_maps[0].keys(), &["10", "alpha", "beta"]);
    }

    #[test]
    fn integer_mapping_gives_identity_indices() {
        let table = Table::new(
            vec!["month".into(), "v".into()],
            vec![
                vec!["0".into(), "1.0".into()],
                vec!["5".into(), "2.0".into()],
            ],
        )
        .unwrap();
        let plan = TensorizePlan {
            axes: vec![AxisSpec {
                column: "month".into(),
                mapping: KeyMapping::Integer,
            }],
            value_column: "v".to_string(),
            aggregation: Aggregation::Sum,
        };
        let out = tensorize_table(&table, &plan).unwrap();
        assert_eq!(out.tensor.shape().dims(), &[6]);
        assert_eq!(out.tensor.get(&[5]).unwrap(), 2.0);
        assert_eq!(out.tensor.nnz(), 2);
    }

    #[test]
    fn bin_mapping_floors_against_origin() {
        let table = Table::new(
            vec!["t".into(), "v".into()],
            vec![
                vec!["0.5".into(), "1.0".into()],
                vec!["11.9".into(), "2.0".into()],
                vec!["12.0".into(), "4.0".into()],
            ],
        )
        .unwrap();
        let plan = TensorizePlan {
            axes: vec![AxisSpec {
                column: "t".into(),
                mapping: KeyMapping::Bin {
                    width: 12.0,
                    origin: 0.0,
                },
            }],
            value_column: "v".to_string(),
            aggregation: Aggregation::Sum,
        };
        let out = tensorize_table(&table, &plan).unwrap();
        assert_eq!(out.tensor.shape().dims(), &[2]);
        assert_eq!(out.tensor.get(&[0]).unwrap(), 3.0);
        assert_eq!(out.tensor.get(&[1]).unwrap(), 4.0);
        assert_eq!(out.axis_maps[0].keys(), &["0", "12"]);
    }

    #[test]
    fn malformed_value_is_an_error_with_row_number() {
        let table = Table::new(
            vec!["k".into(), "v".into()],
            vec![vec!["a".into(), "oops".into()]],
        )
        .unwrap();
        let plan = TensorizePlan {
            axes: vec![distinct_axis("k")],
            value_column: "v".to_string(),
            aggregation: Aggregation::Mean,
        };
        let err = tensorize_table(&table, &plan).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains(":2:"), "{msg}");
    }

    #[test]
    fn missing_columns_are_rejected() {
        let table = wage_like_table();
        let plan = TensorizePlan {
            axes: vec![distinct_axis("nope")],
            value_column: "wage".to_string(),
            aggregation: Aggregation::Mean,
        };
        assert!(tensorize_table(&table, &plan).is_err());
    }

    #[test]
    fn roundtrip_through_axis_maps_recovers_rows() {
        let table = wage_like_table();
        let plan = TensorizePlan {
            axes: vec![distinct_axis("gender"), distinct_axis("region")],
            value_column: "wage".to_string(),
            aggregation: Aggregation::Last,
        };
        let out = tensorize_table(&table, &plan).unwrap();
        for (idx, v) in out.tensor.iter() {
            let gender = out.axis_maps[0].key(idx[0]).unwrap();
            let region = out.axis_maps[1].key(idx[1]).unwrap();
            let found = table
                .rows()
                .iter()
                .rev()
                .find(|r| r[0] == gender && r[2] == region && !r[3].is_empty())
                .unwrap();
            assert_eq!(found[3].parse::<f64>().unwrap(), v);
        }
    }
}
