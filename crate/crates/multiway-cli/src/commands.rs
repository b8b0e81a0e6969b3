//! Implementations of the subcommands.
//!
//! Every command resolves its options through [`Resolver`], writes its
//! artifacts atomically into the output directory together with a
//! `resolved.config` echo, and prints a short summary. Exit codes: 0 on
//! success, 2 for usage errors, 3 for data errors, 4 when an iterative fit
//! stopped at its iteration cap without converging (artifacts are still
//! written).

use crate::config::{parse_f64_list, parse_usize_list, AppError, AppResult, Resolver};
use crate::{
    BssDemoArgs, Cli, CompleteArgs, Command, DecomposeArgs, HankelizeArgs, ParamsArgs,
    RegressArgs, StatsArgs, TensorizeArgs, TtCompressArgs,
};
use multiway::bss::{
    compare_methods_opts, generate_scenario, multiway_cp_options, BssMethod, ScenarioSpec,
    SourceKind,
};
use multiway::decomp::{
    cp_als, hooi, tt_svd, CpInit, CpOptions, FitReport, TtTruncation, TuckerOptions,
};
use multiway::io::{self, format_g17, ModelFile};
use multiway::learn::{
    cp_complete, completed_tensor, cp_regression_fit, param_count, tucker_regression_fit,
    CompletionOptions, CountMode, FillPolicy, ModelKind, ObservationMask, RegressionOptions,
};
use multiway::tensor::{vector_norm, DenseTensor, Matrix, PNorm, SparseTensor};
use multiway::tensorize::{
    central_moment, cumulant_tensor, hankelize_channels, lagged_covariance, tensorize_table,
    Aggregation, AxisSpec, CumulantOrder, KeyMapping, TensorizePlan,
};
use serde_json::{json, Map, Value};
use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

pub fn dispatch(cli: &Cli) -> AppResult<i32> {
    match &cli.command {
        Command::Params(a) => params(cli, a),
        Command::Stats(a) => stats(cli, a),
        Command::Tensorize(a) => tensorize(cli, a),
        Command::Decompose(a) => decompose(cli, a),
        Command::Regress(a) => regress(cli, a),
        Command::Complete(a) => complete(cli, a),
        Command::Hankelize(a) => hankelize(cli, a),
        Command::TtCompress(a) => tt_compress(cli, a),
        Command::BssDemo(a) => bss_demo(cli, a),
    }
}

/// A library error caused by flag values alone.
fn usage(e: multiway::Error) -> AppError {
    AppError::Usage(e.to_string())
}

/// A library error from reading or validating input data. Parse errors
/// already carry `path:line`; plain I/O errors get the path prepended.
fn data(path: &str, e: multiway::Error) -> AppError {
    match e {
        multiway::Error::Io(io) => AppError::Data(format!("{path}: {io}")),
        other => AppError::Data(other.to_string()),
    }
}

struct OutDir(PathBuf);

impl OutDir {
    fn resolve(r: &mut Resolver, cli: &Cli) -> AppResult<OutDir> {
        let dir = r.value("out", cli.out.clone(), Some(".".to_string()))?;
        std::fs::create_dir_all(&dir).map_err(|e| AppError::Data(format!("{dir}: {e}")))?;
        Ok(OutDir(PathBuf::from(dir)))
    }

    fn path(&self, name: &str) -> PathBuf {
        self.0.join(name)
    }

    fn write(&self, name: &str, content: &str) -> AppResult<()> {
        let path = self.path(name);
        io::write_atomic(&path, content).map_err(|e| data(&path.display().to_string(), e))
    }
}

fn pretty(v: &Value) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("serializable report");
    s.push('\n');
    s
}

fn fit_json(report: &FitReport) -> Value {
    json!({
        "converged": report.converged,
        "iterations": report.iterations,
        "final_error": report.final_error(),
        "errors": report.errors,
        "step_truncation": report.step_truncation,
    })
}

/// Summary tail plus exit code for iterative fits.
fn convergence(report: &FitReport) -> (&'static str, i32) {
    if report.converged {
        ("converged", 0)
    } else {
        ("did not converge", 4)
    }
}

fn read_dense(path: &str) -> AppResult<DenseTensor> {
    io::read_dense_tensor(Path::new(path)).map_err(|e| data(path, e))
}

fn read_sparse(path: &str) -> AppResult<SparseTensor> {
    io::read_sparse_tensor(Path::new(path)).map_err(|e| data(path, e))
}

/// Reads a CSV with a header row into a rows-by-columns matrix; every cell
/// must be numeric.
fn read_numeric_csv(path: &str) -> AppResult<(Vec<String>, Matrix)> {
    let table = io::read_table(Path::new(path)).map_err(|e| data(path, e))?;
    let mut rows = Vec::with_capacity(table.rows().len());
    for (i, row) in table.rows().iter().enumerate() {
        let mut parsed = Vec::with_capacity(row.len());
        for (j, cell) in row.iter().enumerate() {
            let v: f64 = cell.trim().parse().map_err(|_| {
                AppError::Data(format!(
                    "{path}:{}: column {:?}: {cell:?} is not a number",
                    i + 2,
                    table.headers()[j]
                ))
            })?;
            parsed.push(v);
        }
        rows.push(parsed);
    }
    if rows.is_empty() {
        return Err(AppError::Data(format!("{path}: no data rows")));
    }
    let m = Matrix::from_rows(&rows).map_err(|e| data(path, e))?;
    Ok((table.headers().to_vec(), m))
}

fn join_g17(values: &[f64], sep: &str) -> String {
    values
        .iter()
        .map(|&v| format_g17(v))
        .collect::<Vec<_>>()
        .join(sep)
}

fn params(cli: &Cli, a: &ParamsArgs) -> AppResult<i32> {
    let mut r = Resolver::new("params", cli.config.as_deref())?;
    let kind_s = r.value("kind", a.kind.clone(), None)?;
    let dims_s = r.value("dims", a.dims.clone(), None)?;
    let rank_s = r.value("rank", a.rank.clone(), Some(String::new()))?;
    let covariates = r.value("covariates", a.covariates, Some(0))?;
    let mode_s = r.value("mode", a.mode.clone(), Some("raw".to_string()))?;
    let out = OutDir::resolve(&mut r, cli)?;
    r.reject_unknown()?;

    let kind = ModelKind::parse(&kind_s).map_err(usage)?;
    let mode = CountMode::parse(&mode_s).map_err(usage)?;
    let dims = parse_usize_list(&dims_s, "--dims")?;
    let ranks = parse_usize_list(&rank_s, "--rank")?;
    let count = param_count(kind, &dims, &ranks, covariates, mode).map_err(usage)?;

    let report = json!({
        "kind": kind_s,
        "mode": mode_s,
        "dims": dims,
        "ranks": ranks,
        "covariates": covariates,
        "count": count.to_string(),
    });
    out.write("report.json", &pretty(&report))?;
    out.write("resolved.config", &r.echo())?;
    println!("{count}");
    Ok(0)
}

fn stats(cli: &Cli, a: &StatsArgs) -> AppResult<i32> {
    let mut r = Resolver::new("stats", cli.config.as_deref())?;
    let input = r.value("input", a.input.clone(), None)?;
    let norms = r.flag("norms", a.norms)?;
    let moments = r.optional("moments", a.moments)?;
    let cumulant = r.optional("cumulant", a.cumulant)?;
    let scov = r.optional("scov", a.scov.clone())?;
    let out = OutDir::resolve(&mut r, cli)?;
    r.reject_unknown()?;
    if !norms && moments.is_none() && cumulant.is_none() && scov.is_none() {
        return Err(AppError::Usage(
            "nothing to compute: pass --norms, --moments, --cumulant, or --scov".to_string(),
        ));
    }

    let (headers, m) = read_numeric_csv(&input)?;
    let mut report = Map::new();
    report.insert("columns".to_string(), json!(headers));

    if norms {
        let mut rows = Vec::new();
        for (j, name) in headers.iter().enumerate() {
            let col = m.col(j);
            let one = vector_norm(&col, PNorm::One).map_err(|e| data(&input, e))?;
            let two = vector_norm(&col, PNorm::Two).map_err(|e| data(&input, e))?;
            let inf = vector_norm(&col, PNorm::Infinity).map_err(|e| data(&input, e))?;
            println!(
                "{name}: one={} two={} infinity={}",
                format_g17(one),
                format_g17(two),
                format_g17(inf)
            );
            rows.push(json!({"column": name, "one": one, "two": two, "infinity": inf}));
        }
        report.insert("norms".to_string(), Value::Array(rows));
    }

    if let Some(max_order) = moments {
        if max_order == 0 {
            return Err(AppError::Usage("--moments must be at least 1".to_string()));
        }
        let mut rows = Vec::new();
        for (j, name) in headers.iter().enumerate() {
            let col = m.col(j);
            let mean = col.iter().sum::<f64>() / col.len() as f64;
            let mut orders = Vec::with_capacity(max_order);
            for order in 1..=max_order {
                orders.push(central_moment(&col, order).map_err(|e| data(&input, e))?);
            }
            rows.push(json!({"column": name, "mean": mean, "central": orders}));
        }
        report.insert("central_moments".to_string(), Value::Array(rows));
        println!("central moments up to order {max_order} for {} columns", headers.len());
    }

    if let Some(k) = cumulant {
        let order = match k {
            3 => CumulantOrder::Third,
            4 => CumulantOrder::Fourth,
            other => {
                return Err(AppError::Usage(format!(
                    "--cumulant must be 3 or 4, got {other}"
                )))
            }
        };
        let t = cumulant_tensor(&m, order).map_err(|e| data(&input, e))?;
        let file = format!("cumulant{k}.txt");
        out.write(&file, &io::dense_to_string(&t))?;
        println!("cumulant order {k}: {} tensor written to {file}", t.shape());
        report.insert(
            "cumulant".to_string(),
            json!({"order": k, "shape": t.shape().dims(), "file": file}),
        );
    }

    if let Some(lags_s) = scov {
        let lags = parse_usize_list(&lags_s, "--scov")?;
        let signals = m.transpose();
        let t = lagged_covariance(&signals, &lags).map_err(|e| data(&input, e))?;
        out.write("scov.txt", &io::dense_to_string(&t))?;
        println!("lagged covariance: {} tensor written to scov.txt", t.shape());
        report.insert(
            "lagged_covariance".to_string(),
            json!({"lags": lags, "shape": t.shape().dims(), "file": "scov.txt"}),
        );
    }

    out.write("stats.json", &pretty(&Value::Object(report)))?;
    out.write("resolved.config", &r.echo())?;
    Ok(0)
}

/// Reads `axis.N.column`, `axis.N.mapping`, `value.column`, and
/// `value.aggregation` keys from a plan file.
fn interpret_plan(map: &BTreeMap<String, String>, source: &str) -> AppResult<TensorizePlan> {
    let mut axes_by_idx: BTreeMap<usize, (Option<String>, Option<String>)> = BTreeMap::new();
    let mut value_column = None;
    let mut aggregation = None;
    for (key, value) in map {
        if let Some(rest) = key.strip_prefix("axis.") {
            let (idx_s, field) = rest.split_once('.').ok_or_else(|| {
                AppError::Data(format!("{source}: plan key {key:?} is not axis.N.column or axis.N.mapping"))
            })?;
            let idx: usize = idx_s.parse().map_err(|_| {
                AppError::Data(format!("{source}: {idx_s:?} is not an axis number in {key:?}"))
            })?;
            let slot = axes_by_idx.entry(idx).or_default();
            match field {
                "column" => slot.0 = Some(value.clone()),
                "mapping" => slot.1 = Some(value.clone()),
                other => {
                    return Err(AppError::Data(format!(
                        "{source}: unknown axis field {other:?} in {key:?}"
                    )))
                }
            }
        } else if key == "value.column" {
            value_column = Some(value.clone());
        } else if key == "value.aggregation" {
            aggregation = Some(value.clone());
        } else {
            return Err(AppError::Data(format!("{source}: unknown plan key {key:?}")));
        }
    }
    let value_column = value_column
        .ok_or_else(|| AppError::Data(format!("{source}: plan is missing value.column")))?;
    let aggregation = match aggregation {
        Some(s) => Aggregation::parse(&s).map_err(|e| AppError::Data(format!("{source}: {e}")))?,
        None => Aggregation::Mean,
    };
    let mut axes = Vec::new();
    for (i, (idx, (column, mapping))) in axes_by_idx.into_iter().enumerate() {
        if idx != i {
            return Err(AppError::Data(format!(
                "{source}: axis numbers must be contiguous from 0, missing axis.{i}"
            )));
        }
        let column = column.ok_or_else(|| {
            AppError::Data(format!("{source}: axis.{idx} is missing its column"))
        })?;
        let mapping = parse_mapping(mapping.as_deref().unwrap_or("distinct"), source)?;
        axes.push(AxisSpec { column, mapping });
    }
    if axes.is_empty() {
        return Err(AppError::Data(format!("{source}: plan defines no axes")));
    }
    Ok(TensorizePlan {
        axes,
        value_column,
        aggregation,
    })
}

fn parse_mapping(s: &str, source: &str) -> AppResult<KeyMapping> {
    match s {
        "integer" => return Ok(KeyMapping::Integer),
        "distinct" => return Ok(KeyMapping::Distinct),
        _ => {}
    }
    if let Some(rest) = s.strip_prefix("bin:") {
        let mut parts = rest.split(':');
        let width_s = parts.next().unwrap_or("");
        let width: f64 = width_s.parse().map_err(|_| {
            AppError::Data(format!("{source}: bin width {width_s:?} is not a number"))
        })?;
        let origin = match parts.next() {
            Some(o) => o.parse().map_err(|_| {
                AppError::Data(format!("{source}: bin origin {o:?} is not a number"))
            })?,
            None => 0.0,
        };
        if parts.next().is_some() {
            return Err(AppError::Data(format!(
                "{source}: mapping {s:?} has too many fields"
            )));
        }
        if !(width.is_finite() && width > 0.0) {
            return Err(AppError::Data(format!(
                "{source}: bin width must be positive, got {width_s}"
            )));
        }
        return Ok(KeyMapping::Bin { width, origin });
    }
    Err(AppError::Data(format!(
        "{source}: unknown mapping {s:?}; expected integer, distinct, or bin:WIDTH[:ORIGIN]"
    )))
}

fn tensorize(cli: &Cli, a: &TensorizeArgs) -> AppResult<i32> {
    let mut r = Resolver::new("tensorize", cli.config.as_deref())?;
    let input = r.value("input", a.input.clone(), None)?;
    let plan_path = r.value("plan", a.plan.clone(), None)?;
    let out = OutDir::resolve(&mut r, cli)?;
    r.reject_unknown()?;

    let plan_map = crate::config::read_config(Path::new(&plan_path))?;
    let plan = interpret_plan(&plan_map, &plan_path)?;
    let table = io::read_table(Path::new(&input)).map_err(|e| data(&input, e))?;
    let result = tensorize_table(&table, &plan).map_err(|e| data(&input, e))?;

    out.write("tensor.txt", &io::sparse_to_string(&result.tensor))?;
    io::write_axis_maps(&out.path("axis_maps.csv"), &result.axis_maps)
        .map_err(|e| data(&out.path("axis_maps.csv").display().to_string(), e))?;
    let shape = result.tensor.shape();
    let report = json!({
        "shape": shape.dims(),
        "size": shape.size().to_string(),
        "nnz": result.tensor.nnz(),
        "density": result.tensor.density(),
        "collisions": result.collisions,
        "skipped_rows": result.skipped_rows,
    });
    out.write("report.json", &pretty(&report))?;
    out.write("resolved.config", &r.echo())?;
    println!(
        "tensor {shape}: {} stored entries (density {}), {} collisions, {} skipped rows",
        result.tensor.nnz(),
        format_g17(result.tensor.density()),
        result.collisions,
        result.skipped_rows
    );
    Ok(0)
}

fn decompose(cli: &Cli, a: &DecomposeArgs) -> AppResult<i32> {
    let mut r = Resolver::new("decompose", cli.config.as_deref())?;
    let input = r.value("input", a.input.clone(), None)?;
    let kind = r.value("kind", a.kind.clone(), None)?;
    match kind.as_str() {
        "cp" => {
            let rank_s = r.value("rank", a.rank.clone(), None)?;
            let defaults = CpOptions::default();
            let opts = CpOptions {
                max_iters: r.value("max-iters", a.max_iters, Some(defaults.max_iters))?,
                tol: r.value("tol", a.tol, Some(defaults.tol))?,
                seed: r.value("seed", a.seed, Some(defaults.seed))?,
                restarts: r.value("restarts", a.restarts, Some(defaults.restarts))?,
                ridge: r.value("ridge", a.ridge, Some(defaults.ridge))?,
                init: match r
                    .value("init", a.init.clone(), Some("random".to_string()))?
                    .as_str()
                {
                    "random" => CpInit::Random,
                    "hosvd" => CpInit::Hosvd,
                    other => {
                        return Err(AppError::Usage(format!(
                            "--init must be random or hosvd, got {other:?}"
                        )))
                    }
                },
            };
            let out = OutDir::resolve(&mut r, cli)?;
            r.reject_unknown()?;
            let ranks = parse_usize_list(&rank_s, "--rank")?;
            let &[rank] = ranks.as_slice() else {
                return Err(AppError::Usage(
                    "--rank must be a single integer for kind cp".to_string(),
                ));
            };
            let t = read_dense(&input)?;
            let (model, report) = cp_als(&t, rank, &opts).map_err(|e| data(&input, e))?;
            io::write_model(&out.path("model.txt"), &ModelFile::Cp(model))
                .map_err(|e| data(&out.path("model.txt").display().to_string(), e))?;
            out.write("fit.json", &pretty(&fit_json(&report)))?;
            out.write("resolved.config", &r.echo())?;
            let (status, code) = convergence(&report);
            println!(
                "cp rank {rank}: relative error {} after {} iterations ({status})",
                format_g17(report.final_error()),
                report.iterations
            );
            Ok(code)
        }
        "tucker" => {
            let rank_s = r.value("rank", a.rank.clone(), None)?;
            let defaults = TuckerOptions::default();
            let opts = TuckerOptions {
                max_iters: r.value("max-iters", a.max_iters, Some(defaults.max_iters))?,
                tol: r.value("tol", a.tol, Some(defaults.tol))?,
            };
            let out = OutDir::resolve(&mut r, cli)?;
            r.reject_unknown()?;
            let ranks = parse_usize_list(&rank_s, "--rank")?;
            let t = read_dense(&input)?;
            let (model, report) = hooi(&t, &ranks, &opts).map_err(|e| data(&input, e))?;
            io::write_model(&out.path("model.txt"), &ModelFile::Tucker(model))
                .map_err(|e| data(&out.path("model.txt").display().to_string(), e))?;
            out.write("fit.json", &pretty(&fit_json(&report)))?;
            out.write("resolved.config", &r.echo())?;
            let (status, code) = convergence(&report);
            println!(
                "tucker ranks {rank_s}: relative error {} after {} iterations ({status})",
                format_g17(report.final_error()),
                report.iterations
            );
            Ok(code)
        }
        "tt" => {
            let rank_s = r.optional("rank", a.rank.clone())?;
            let tol = r.optional("tol", a.tol)?;
            let out = OutDir::resolve(&mut r, cli)?;
            r.reject_unknown()?;
            let trunc = match (&rank_s, tol) {
                (Some(_), Some(_)) => {
                    return Err(AppError::Usage(
                        "kind tt takes --rank or --tol, not both".to_string(),
                    ))
                }
                (Some(s), None) => TtTruncation::MaxRanks(parse_usize_list(s, "--rank")?),
                (None, Some(t)) => TtTruncation::Tolerance(t),
                (None, None) => TtTruncation::Exact,
            };
            let t = read_dense(&input)?;
            let (model, report) = tt_svd(&t, &trunc).map_err(|e| data(&input, e))?;
            let ranks = model.ranks();
            io::write_model(&out.path("model.txt"), &ModelFile::Tt(model))
                .map_err(|e| data(&out.path("model.txt").display().to_string(), e))?;
            out.write("fit.json", &pretty(&fit_json(&report)))?;
            out.write("resolved.config", &r.echo())?;
            println!(
                "tt ranks {:?}: relative error {}",
                ranks,
                format_g17(report.final_error())
            );
            Ok(0)
        }
        other => Err(AppError::Usage(format!(
            "--kind must be cp, tucker, or tt, got {other:?}"
        ))),
    }
}

fn regress(cli: &Cli, a: &RegressArgs) -> AppResult<i32> {
    let mut r = Resolver::new("regress", cli.config.as_deref())?;
    let samples_path = r.value("samples", a.samples.clone(), None)?;
    let kind = r.value("kind", a.kind.clone(), None)?;
    let rank_s = r.value("rank", a.rank.clone(), None)?;
    let defaults = RegressionOptions::default();
    let opts = RegressionOptions {
        max_sweeps: r.value("sweeps", a.sweeps, Some(defaults.max_sweeps))?,
        tol: r.value("tol", a.tol, Some(defaults.tol))?,
        lambda: r.value("lambda", a.lambda, Some(defaults.lambda))?,
        seed: r.value("seed", a.seed, Some(defaults.seed))?,
    };
    let out = OutDir::resolve(&mut r, cli)?;
    r.reject_unknown()?;

    let samples =
        io::read_regression_samples(Path::new(&samples_path)).map_err(|e| data(&samples_path, e))?;
    let ranks = parse_usize_list(&rank_s, "--rank")?;
    let (model, report) = match kind.as_str() {
        "cp" => {
            let &[rank] = ranks.as_slice() else {
                return Err(AppError::Usage(
                    "--rank must be a single integer for kind cp".to_string(),
                ));
            };
            let (model, report) =
                cp_regression_fit(&samples, rank, &opts).map_err(|e| data(&samples_path, e))?;
            (ModelFile::CpRegression(model), report)
        }
        "tucker" => {
            let (model, report) =
                tucker_regression_fit(&samples, &ranks, &opts).map_err(|e| data(&samples_path, e))?;
            (ModelFile::TuckerRegression(model), report)
        }
        other => {
            return Err(AppError::Usage(format!(
                "--kind must be cp or tucker, got {other:?}"
            )))
        }
    };
    io::write_model(&out.path("model.txt"), &model)
        .map_err(|e| data(&out.path("model.txt").display().to_string(), e))?;
    out.write("fit.json", &pretty(&fit_json(&report)))?;
    out.write("resolved.config", &r.echo())?;
    let (status, code) = convergence(&report);
    println!(
        "{} rank {rank_s} on {} samples: objective {} after {} sweeps ({status})",
        model.kind(),
        samples.len(),
        format_g17(report.final_error()),
        report.iterations
    );
    Ok(code)
}

fn complete(cli: &Cli, a: &CompleteArgs) -> AppResult<i32> {
    let mut r = Resolver::new("complete", cli.config.as_deref())?;
    let input = r.value("input", a.input.clone(), None)?;
    let mask_path = r.optional("mask", a.mask.clone())?;
    let rank = r.value("rank", a.rank, None)?;
    let defaults = CompletionOptions::default();
    let opts = CompletionOptions {
        max_iters: r.value("max-iters", a.max_iters, Some(defaults.max_iters))?,
        tol: r.value("tol", a.tol, Some(defaults.tol))?,
        seed: r.value("seed", a.seed, Some(defaults.seed))?,
        ridge: r.value("ridge", a.ridge, Some(defaults.ridge))?,
        restarts: r.value("restarts", a.restarts, Some(defaults.restarts))?,
        init: match r
            .value("init", a.init.clone(), Some("hosvd".to_string()))?
            .as_str()
        {
            "random" => CpInit::Random,
            "hosvd" => CpInit::Hosvd,
            other => {
                return Err(AppError::Usage(format!(
                    "--init must be random or hosvd, got {other:?}"
                )))
            }
        },
    };
    let fill = match r
        .value("fill", a.fill.clone(), Some("keep".to_string()))?
        .as_str()
    {
        "keep" => FillPolicy::KeepObserved,
        "model" => FillPolicy::ModelEverywhere,
        other => {
            return Err(AppError::Usage(format!(
                "--fill must be keep or model, got {other:?}"
            )))
        }
    };
    let out = OutDir::resolve(&mut r, cli)?;
    r.reject_unknown()?;

    let observed = read_sparse(&input)?;
    let mask = match mask_path {
        Some(p) => ObservationMask::from_sparse(read_sparse(&p)?).map_err(|e| data(&p, e))?,
        None => {
            let mut indicator = SparseTensor::new(observed.shape().clone());
            for (idx, _) in observed.iter() {
                indicator
                    .insert(idx.to_vec(), 1.0)
                    .map_err(|e| data(&input, e))?;
            }
            ObservationMask::from_sparse(indicator).map_err(|e| data(&input, e))?
        }
    };
    let (model, report) = cp_complete(&observed, &mask, rank, &opts).map_err(|e| data(&input, e))?;
    let filled = completed_tensor(&observed, &mask, &model, fill).map_err(|e| data(&input, e))?;

    out.write("completed.txt", &io::dense_to_string(&filled))?;
    io::write_model(&out.path("model.txt"), &ModelFile::Cp(model))
        .map_err(|e| data(&out.path("model.txt").display().to_string(), e))?;
    out.write("fit.json", &pretty(&fit_json(&report)))?;
    out.write("resolved.config", &r.echo())?;
    let (status, code) = convergence(&report);
    println!(
        "completion rank {rank}: observed error {} after {} sweeps ({status}); {} observed of {} cells",
        format_g17(report.final_error()),
        report.iterations,
        mask.count(),
        observed.shape().size()
    );
    Ok(code)
}

fn hankelize(cli: &Cli, a: &HankelizeArgs) -> AppResult<i32> {
    let mut r = Resolver::new("hankelize", cli.config.as_deref())?;
    let input = r.value("input", a.input.clone(), None)?;
    let window = r.value("window", a.window, None)?;
    let out = OutDir::resolve(&mut r, cli)?;
    r.reject_unknown()?;

    let (_, m) = read_numeric_csv(&input)?;
    let signals = m.transpose();
    let t = hankelize_channels(&signals, window).map_err(|e| data(&input, e))?;
    out.write("tensor.txt", &io::dense_to_string(&t))?;
    out.write("resolved.config", &r.echo())?;
    println!(
        "hankel tensor {} from {} channels of length {}",
        t.shape(),
        signals.rows(),
        signals.cols()
    );
    Ok(0)
}

fn tt_compress(cli: &Cli, a: &TtCompressArgs) -> AppResult<i32> {
    let mut r = Resolver::new("tt-compress", cli.config.as_deref())?;
    let weights_path = r.value("weights", a.weights.clone(), None)?;
    let bias_path = r.optional("bias", a.bias.clone())?;
    let input_dims_s = r.value("input-dims", a.input_dims.clone(), None)?;
    let output_dims_s = r.value("output-dims", a.output_dims.clone(), None)?;
    let max_ranks_s = r.optional("max-ranks", a.max_ranks.clone())?;
    let tol = r.optional("tol", a.tol)?;
    let out = OutDir::resolve(&mut r, cli)?;
    r.reject_unknown()?;

    let m_dims = parse_usize_list(&input_dims_s, "--input-dims")?;
    let n_dims = parse_usize_list(&output_dims_s, "--output-dims")?;
    let trunc = match (&max_ranks_s, tol) {
        (Some(_), Some(_)) => {
            return Err(AppError::Usage(
                "pass --max-ranks or --tol, not both".to_string(),
            ))
        }
        (Some(s), None) => TtTruncation::MaxRanks(parse_usize_list(s, "--max-ranks")?),
        (None, Some(t)) => TtTruncation::Tolerance(t),
        (None, None) => TtTruncation::Exact,
    };
    let w = io::read_matrix(Path::new(&weights_path)).map_err(|e| data(&weights_path, e))?;
    let bias = match bias_path {
        Some(p) => io::read_vector(Path::new(&p)).map_err(|e| data(&p, e))?,
        None => vec![0.0; w.rows()],
    };
    let (layer, report) = multiway::compress::matrix_to_tt_layer(&w, &bias, &m_dims, &n_dims, &trunc)
        .map_err(|e| data(&weights_path, e))?;
    let comp = multiway::compress::compression_report(&layer);
    let ranks = layer.ranks();
    io::write_model(&out.path("layer.txt"), &ModelFile::TtLayer(layer))
        .map_err(|e| data(&out.path("layer.txt").display().to_string(), e))?;
    let report_json = json!({
        "ranks": ranks,
        "dense_weight_params": comp.dense_weight_params.to_string(),
        "tt_weight_params": comp.tt_weight_params.to_string(),
        "weight_ratio": comp.weight_ratio,
        "dense_params": comp.dense_params.to_string(),
        "tt_params": comp.tt_params.to_string(),
        "ratio": comp.ratio,
        "fit": fit_json(&report),
    });
    out.write("report.json", &pretty(&report_json))?;
    out.write("resolved.config", &r.echo())?;
    println!(
        "tt layer ranks {:?}: weight parameters {} -> {} (ratio {})",
        ranks,
        comp.dense_weight_params,
        comp.tt_weight_params,
        format_g17(comp.weight_ratio)
    );
    Ok(0)
}

fn bss_demo(cli: &Cli, a: &BssDemoArgs) -> AppResult<i32> {
    let mut r = Resolver::new("bss-demo", cli.config.as_deref())?;
    let freqs_s = r.value("freqs", a.freqs.clone(), Some("0.3,0.8".to_string()))?;
    let decays_s = r.optional("decays", a.decays.clone())?;
    let channels = r.value("channels", a.channels, Some(3))?;
    let samples = r.value("samples", a.samples, Some(400))?;
    let noise = r.value("noise", a.noise, Some(0.0))?;
    let seed = r.value("seed", a.seed, Some(42))?;
    let window = r.value("window", a.window, Some(samples / 2))?;
    let freqs = parse_f64_list(&freqs_s, "--freqs")?;
    let rank = r.value("rank", a.rank, Some(2 * freqs.len()))?;
    let methods_s = r.value(
        "methods",
        a.methods.clone(),
        Some("pca,fastica,multiway".to_string()),
    )?;
    let out = OutDir::resolve(&mut r, cli)?;
    r.reject_unknown()?;

    let decays = match decays_s {
        Some(s) => parse_f64_list(&s, "--decays")?,
        None => Vec::new(),
    };
    if !decays.is_empty() && decays.len() != freqs.len() {
        return Err(AppError::Usage(format!(
            "--decays lists {} values for {} frequencies",
            decays.len(),
            freqs.len()
        )));
    }
    let sources: Vec<SourceKind> = freqs
        .iter()
        .enumerate()
        .map(|(i, &omega)| {
            let decay = decays.get(i).copied().unwrap_or(0.0);
            if decay == 0.0 {
                SourceKind::Sinusoid { omega }
            } else {
                SourceKind::DampedExponential { omega, decay }
            }
        })
        .collect();
    let methods: Vec<BssMethod> = methods_s
        .split(',')
        .map(|s| match s.trim() {
            "pca" => Ok(BssMethod::Pca),
            "fastica" => Ok(BssMethod::FastIca),
            "multiway" => Ok(BssMethod::Multiway),
            other => Err(AppError::Usage(format!(
                "unknown method {other:?}; expected pca, fastica, or multiway"
            ))),
        })
        .collect::<AppResult<_>>()?;
    if methods.is_empty() {
        return Err(AppError::Usage("--methods names no methods".to_string()));
    }

    let spec = ScenarioSpec {
        sources,
        channels,
        samples,
        noise,
        seed,
    };
    let scenario = generate_scenario(&spec).map_err(usage)?;
    let comparison =
        compare_methods_opts(&scenario, &methods, window, rank, &multiway_cp_options(seed));

    out.write("comparison.csv", &comparison.metrics_csv())?;
    out.write("signals.csv", &comparison.signals_csv(&scenario))?;
    out.write("resolved.config", &r.echo())?;
    for row in &comparison.rows {
        match &row.outcome {
            Ok(res) => println!(
                "{}: residual {}, source correlations {}",
                row.method,
                format_g17(res.residual),
                join_g17(&res.correlations, " ")
            ),
            Err(msg) => println!("{}: failed: {msg}", row.method),
        }
    }
    Ok(0)
}
