//! CSV ingestion and sidecar files.

use crate::error::{Error, Result};
use crate::learn::RegressionSample;
use crate::tensorize::{AxisMap, Table};
use std::path::Path;

fn csv_error(origin: &str, e: &csv::Error) -> Error {
    let line = e.position().map(|p| p.line() as usize).unwrap_or(0);
    Error::parse(origin, line, e.to_string())
}

/// Loads a header-rowed CSV into a [`Table`].
pub fn table_from_reader(reader: impl std::io::Read, origin: &str) -> Result<Table> {
    let mut r = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let headers: Vec<String> = r
        .headers()
        .map_err(|e| csv_error(origin, &e))?
        .iter()
        .map(str::to_string)
        .collect();
    let mut rows = Vec::new();
    for record in r.records() {
        let record = record.map_err(|e| csv_error(origin, &e))?;
        rows.push(record.iter().map(str::to_string).collect());
    }
    Table::new(headers, rows)
}

pub fn read_table(path: &Path) -> Result<Table> {
    let file = std::fs::File::open(path)?;
    table_from_reader(file, &path.display().to_string())
}

/// Renders axis maps as `mode,index,original_key` CSV (with a header row).
pub fn axis_maps_to_csv(maps: &[AxisMap]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["mode", "index", "original_key"])
        .expect("in-memory write");
    for (mode, map) in maps.iter().enumerate() {
        for (index, key) in map.keys().iter().enumerate() {
            w.write_record([&mode.to_string(), &index.to_string(), key])
                .expect("in-memory write");
        }
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf8 csv")
}

pub fn write_axis_maps(path: &Path, maps: &[AxisMap]) -> Result<()> {
    super::write_atomic(path, &axis_maps_to_csv(maps))
}

/// Loads regression samples from a manifest CSV whose first column names a
/// tensor text file (relative to the manifest), whose last column is the
/// response, and whose middle columns are scalar covariates.
pub fn read_regression_samples(manifest: &Path) -> Result<Vec<RegressionSample>> {
    let origin = manifest.display().to_string();
    let base = manifest.parent().unwrap_or(Path::new("."));
    let file = std::fs::File::open(manifest)?;
    let mut r = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(file);
    let width = r.headers().map_err(|e| csv_error(&origin, &e))?.len();
    if width < 2 {
        return Err(Error::parse(
            &origin,
            1,
            "need at least a tensor column and a response column",
        ));
    }
    let mut samples = Vec::new();
    for record in r.records() {
        let record = record.map_err(|e| csv_error(&origin, &e))?;
        let line = record.position().map(|p| p.line() as usize).unwrap_or(0);
        let fields: Vec<&str> = record.iter().collect();
        let x = super::read_dense_tensor(&base.join(fields[0]))?;
        let mut covariates = Vec::with_capacity(width - 2);
        for f in &fields[1..width - 1] {
            covariates.push(f.parse::<f64>().map_err(|_| {
                Error::parse(&origin, line, format!("bad covariate `{f}`"))
            })?);
        }
        let y: f64 = fields[width - 1].parse().map_err(|_| {
            Error::parse(&origin, line, format!("bad response `{}`", fields[width - 1]))
        })?;
        samples.push(RegressionSample { x, covariates, y });
    }
    Ok(samples)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::io::dense_to_string;
    use crate::tensor::{DenseTensor, Shape};
    use crate::tensorize::{tensorize_table, Aggregation, AxisSpec, KeyMapping, TensorizePlan};

    #[test]
    fn csv_loads_into_a_table() {
        let src = "city,year,sales\nOslo,2001,5\n\"a,b\",2002,7\n";
        let t = table_from_reader(src.as_bytes(), "<mem>").unwrap();
        assert_eq!(t.headers(), ["city", "year", "sales"]);
        assert_eq!(t.rows().len(), 2);
        assert_eq!(t.rows()[1][0], "a,b");
    }

    #[test]
    fn ragged_rows_are_an_error_with_a_line() {
        let src = "a,b\n1,2\n3\n";
        let err = table_from_reader(src.as_bytes(), "t.csv").unwrap_err().to_string();
        assert!(err.contains("t.csv:3"), "{err}");
    }

    #[test]
    fn axis_maps_render_with_quoting() {
        let src = "k,v\nplain,1\n\"needs,quote\",2\n";
        let table = table_from_reader(src.as_bytes(), "<mem>").unwrap();
        let plan = TensorizePlan {
            axes: vec![AxisSpec {
                column: "k".to_string(),
                mapping: KeyMapping::Distinct,
            }],
            value_column: "v".to_string(),
            aggregation: Aggregation::Sum,
        };
        let result = tensorize_table(&table, &plan).unwrap();
        let csv = axis_maps_to_csv(&result.axis_maps);
        assert_eq!(
            csv,
            "mode,index,original_key\n0,0,\"needs,quote\"\n0,1,plain\n"
        );
    }

    #[test]
    fn sample_manifests_resolve_relative_tensor_paths() {
        let dir = std::env::temp_dir().join(format!("multiway-samples-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let x = DenseTensor::from_data(
            Shape::new(vec![2, 2]).unwrap(),
            vec![1.0, 2.0, 3.0, 4.0],
        )
        .unwrap();
        std::fs::write(dir.join("x0.txt"), dense_to_string(&x)).unwrap();
        std::fs::write(
            dir.join("samples.csv"),
            "file,z1,z2,y\nx0.txt,0.5,-1,3.25\n",
        )
        .unwrap();
        let samples = read_regression_samples(&dir.join("samples.csv")).unwrap();
        assert_eq!(samples.len(), 1);
        assert_eq!(samples[0].covariates, vec![0.5, -1.0]);
        assert_eq!(samples[0].y, 3.25);
        assert_eq!(samples[0].x.data(), x.data());

        std::fs::write(
            dir.join("samples.csv"),
            "file,z1,z2,y\nx0.txt,what,-1,3.25\n",
        )
        .unwrap();
        let err = read_regression_samples(&dir.join("samples.csv"))
            .unwrap_err()
            .to_string();
        assert!(err.contains("samples.csv:2") && err.contains("covariate"), "{err}");
        std::fs::remove_dir_all(&dir).unwrap();
    }
}
