//! Blind source separation on synthetic mixtures.
//!
//! The harness generates seeded multichannel mixtures of known sources and
//! compares three separation routes: a PCA projection, FastICA, and a
//! multiway method that Hankelizes the channels into a 3-way tensor and
//! splits it with CP. Ground truth is kept alongside the mixtures so every
//! method reports sign- and permutation-invariant source correlations next
//! to its mixture residual.

use crate::decomp::{cp_als, CpInit, CpOptions};
use crate::error::{Error, Result};
use crate::io::format_g17;
use crate::linalg::{eigh, pca, svd, sym_inv_sqrt};
use crate::tensor::Matrix;
use crate::tensorize::{dehankelize, dehankelize_channels, hankelize_channels};
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use std::f64::consts::TAU;

/// Parametric source signal shapes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SourceKind {
    /// `cos(omega * t + phase)` with a seeded random phase.
    Sinusoid { omega: f64 },
    /// `exp(-decay * t) * cos(omega * t + phase)`.
    DampedExponential { omega: f64, decay: f64 },
}

impl SourceKind {
    fn omega(&self) -> f64 {
        match *self {
            SourceKind::Sinusoid { omega } => omega,
            SourceKind::DampedExponential { omega, .. } => omega,
        }
    }

    fn sample(&self, t: usize, phase: f64) -> f64 {
        let t = t as f64;
        match *self {
            SourceKind::Sinusoid { omega } => (omega * t + phase).cos(),
            SourceKind::DampedExponential { omega, decay } => {
                (-decay * t).exp() * (omega * t + phase).cos()
            }
        }
    }
}

/// Recipe for a synthetic scenario.
#[derive(Debug, Clone)]
pub struct ScenarioSpec {
    pub sources: Vec<SourceKind>,
    pub channels: usize,
    pub samples: usize,
    /// Standard deviation of additive channel noise (0 for noiseless).
    pub noise: f64,
    pub seed: u64,
}

impl Default for ScenarioSpec {
    /// Two sinusoids at 0.3 and 0.8 rad/sample, three channels, 400
    /// samples, noiseless, seed 42.
    fn default() -> Self {
        ScenarioSpec {
            sources: vec![
                SourceKind::Sinusoid { omega: 0.3 },
                SourceKind::Sinusoid { omega: 0.8 },
            ],
            channels: 3,
            samples: 400,
            noise: 0.0,
            seed: 42,
        }
    }
}

/// A generated mixing experiment with its ground truth.
#[derive(Debug, Clone)]
pub struct BssScenario {
    /// True sources, one per row, unit power.
    pub sources: Matrix,
    /// Channel-by-source mixing matrix, full column rank.
    pub mixing: Matrix,
    /// Observed channels: `mixing * sources` plus any noise.
    pub mixtures: Matrix,
    pub noise: f64,
    pub seed: u64,
}

impl BssScenario {
    /// Builds a noiseless scenario from explicit sources and mixing,
    /// checking shapes and that the mixing has full column rank.
    pub fn from_parts(sources: Matrix, mixing: Matrix, seed: u64) -> Result<Self> {
        let k = sources.rows();
        if mixing.cols() != k {
            return Err(Error::ShapeMismatch {
                expected: format!("mixing with {k} columns"),
                got: format!("{} columns", mixing.cols()),
            });
        }
        if mixing.rows() < k {
            return Err(Error::invalid(
                "need at least as many channels as sources",
            ));
        }
        if svd(&mixing)?.rank() < k {
            return Err(Error::invalid("mixing matrix is column rank deficient"));
        }
        let mixtures = mixing.matmul(&sources)?;
        Ok(BssScenario {
            sources,
            mixing,
            mixtures,
            noise: 0.0,
            seed,
        })
    }

    /// Number of true sources.
    pub fn source_count(&self) -> usize {
        self.sources.rows()
    }

    pub fn channel_count(&self) -> usize {
        self.mixtures.rows()
    }

    pub fn sample_count(&self) -> usize {
        self.mixtures.cols()
    }
}

/// Samples a scenario: seeded phases, unit-power sources, standard normal
/// mixing, optional additive noise. Deterministic for a given spec.
pub fn generate_scenario(spec: &ScenarioSpec) -> Result<BssScenario> {
    let k = spec.sources.len();
    if k == 0 {
        return Err(Error::invalid("need at least one source"));
    }
    if spec.channels < k {
        return Err(Error::invalid(
            "need at least as many channels as sources",
        ));
    }
    if spec.samples < 4 {
        return Err(Error::invalid("need at least four samples"));
    }
    if !(spec.noise >= 0.0) {
        return Err(Error::invalid("noise level must be nonnegative"));
    }
    for kind in &spec.sources {
        let w = kind.omega();
        if !(w > 0.0 && w < std::f64::consts::PI) {
            return Err(Error::invalid(
                "source frequencies must lie strictly between 0 and pi rad/sample",
            ));
        }
        if let SourceKind::DampedExponential { decay, .. } = kind {
            if !(*decay >= 0.0) {
                return Err(Error::invalid("decay must be nonnegative"));
            }
        }
    }
    for i in 0..k {
        for j in i + 1..k {
            if (spec.sources[i].omega() - spec.sources[j].omega()).abs() < 1e-9 {
                return Err(Error::invalid("source frequencies must be distinct"));
            }
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut sources = Matrix::zeros(k, spec.samples);
    for (i, kind) in spec.sources.iter().enumerate() {
        let phase = rng.random::<f64>() * TAU;
        for t in 0..spec.samples {
            sources[(i, t)] = kind.sample(t, phase);
        }
        if !unit_power(sources.row_mut(i)) {
            return Err(Error::invalid("generated source is identically zero"));
        }
    }
    let mixing = Matrix::from_fn(spec.channels, k, |_, _| rng.sample(StandardNormal));
    let mut scenario = BssScenario::from_parts(sources, mixing, spec.seed)?;
    scenario.noise = spec.noise;
    if spec.noise > 0.0 {
        for v in scenario.mixtures.data_mut() {
            *v += spec.noise * rng.sample::<f64, _>(StandardNormal);
        }
    }
    Ok(scenario)
}

/// One method's separation output.
///
/// `estimates` rows are permuted and sign-flipped to line up with the
/// scenario's true sources and normalized to unit power; `correlations[i]`
/// is the absolute Pearson correlation of row i against true source i under
/// that best alignment.
#[derive(Debug, Clone)]
pub struct BssResult {
    pub method: String,
    pub estimates: Matrix,
    /// `norm(X - X_hat) / norm(X)` for the method's own mixture model.
    pub residual: f64,
    pub correlations: Vec<f64>,
    pub converged: bool,
    pub iterations: usize,
}

/// Scales a signal to unit mean square in place; returns false if it is
/// numerically zero.
fn unit_power(v: &mut [f64]) -> bool {
    let ms = v.iter().map(|x| x * x).sum::<f64>() / v.len() as f64;
    if ms <= f64::MIN_POSITIVE {
        return false;
    }
    let s = 1.0 / ms.sqrt();
    for x in v {
        *x *= s;
    }
    true
}

fn pearson(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len() as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let mut dot = 0.0;
    let mut na = 0.0;
    let mut nb = 0.0;
    for (x, y) in a.iter().zip(b) {
        let (x, y) = (x - ma, y - mb);
        dot += x * y;
        na += x * x;
        nb += y * y;
    }
    if na <= 0.0 || nb <= 0.0 {
        return 0.0;
    }
    dot / (na * nb).sqrt()
}

fn assignment_search(
    scores: &Matrix,
    row: usize,
    used: &mut [bool],
    cur: &mut [usize],
    acc: f64,
    best: &mut (f64, Vec<usize>),
) {
    if row == scores.rows() {
        if acc > best.0 {
            best.0 = acc;
            best.1 = cur.to_vec();
        }
        return;
    }
    for j in 0..scores.cols() {
        if used[j] {
            continue;
        }
        used[j] = true;
        cur[row] = j;
        assignment_search(scores, row + 1, used, cur, acc + scores[(row, j)], best);
        used[j] = false;
    }
}

/// Matches estimate rows to reference rows, maximizing the total absolute
/// correlation over injective assignments, and returns the aligned copies.
///
/// The metric is invariant to sign flips and permutations of the estimates.
/// Exhaustive search; estimate counts above 8 are rejected.
pub fn align_estimates(reference: &Matrix, estimates: &Matrix) -> Result<(Vec<f64>, Matrix)> {
    let k = reference.rows();
    let j = estimates.rows();
    if estimates.cols() != reference.cols() {
        return Err(Error::ShapeMismatch {
            expected: format!("estimates with {} samples", reference.cols()),
            got: format!("{} samples", estimates.cols()),
        });
    }
    if j < k {
        return Err(Error::invalid(format!(
            "{j} estimates cannot cover {k} reference sources"
        )));
    }
    if j > 8 {
        return Err(Error::invalid(
            "alignment search is exhaustive and capped at 8 estimates",
        ));
    }
    let signed = Matrix::from_fn(k, j, |i, c| pearson(reference.row(i), estimates.row(c)));
    let scores = Matrix::from_fn(k, j, |i, c| signed[(i, c)].abs());
    let mut best = (f64::NEG_INFINITY, vec![0usize; k]);
    assignment_search(&scores, 0, &mut vec![false; j], &mut vec![0usize; k], 0.0, &mut best);
    let assignment = best.1;
    let mut corrs = Vec::with_capacity(k);
    let mut aligned = Matrix::zeros(k, reference.cols());
    for i in 0..k {
        let c = assignment[i];
        corrs.push(scores[(i, c)]);
        let flip = if signed[(i, c)] < 0.0 { -1.0 } else { 1.0 };
        for (t, v) in estimates.row(c).iter().enumerate() {
            aligned[(i, t)] = flip * v;
        }
    }
    Ok((corrs, aligned))
}

/// Per-reference-source best absolute correlations; see [`align_estimates`].
pub fn align_correlations(reference: &Matrix, estimates: &Matrix) -> Result<Vec<f64>> {
    Ok(align_estimates(reference, estimates)?.0)
}

fn relative_residual(x: &Matrix, x_hat: &Matrix) -> f64 {
    let mut diff2 = 0.0;
    for (a, b) in x.data().iter().zip(x_hat.data()) {
        diff2 += (a - b) * (a - b);
    }
    let norm = x.frobenius_norm();
    if norm == 0.0 {
        return if diff2 == 0.0 { 0.0 } else { f64::INFINITY };
    }
    diff2.sqrt() / norm
}

fn finish(
    method: &str,
    scenario: &BssScenario,
    raw_estimates: &Matrix,
    x_hat: &Matrix,
    converged: bool,
    iterations: usize,
) -> Result<BssResult> {
    let (correlations, mut estimates) = align_estimates(&scenario.sources, raw_estimates)?;
    for i in 0..estimates.rows() {
        unit_power(estimates.row_mut(i));
    }
    Ok(BssResult {
        method: method.to_string(),
        estimates,
        residual: relative_residual(&scenario.mixtures, x_hat),
        correlations,
        converged,
        iterations,
    })
}

/// Separation by plain PCA: the estimates are the top-k principal score
/// time series of the channels. With `k` equal to the channel count the
/// projection is a full basis and the residual is zero.
pub fn bss_pca(scenario: &BssScenario, k: usize) -> Result<BssResult> {
    let c = scenario.channel_count();
    if k == 0 || k > c {
        return Err(Error::invalid(format!("component count {k} not in 1..={c}")));
    }
    let p = pca(&scenario.mixtures.transpose(), k)?;
    let estimates = p.scores.transpose();
    let recon = p.scores.matmul(&p.components.transpose())?;
    let x_hat = Matrix::from_fn(c, scenario.sample_count(), |i, t| recon[(t, i)] + p.mean[i]);
    finish("pca", scenario, &estimates, &x_hat, true, 1)
}

/// FastICA settings: tanh contrast, symmetric decorrelation.
#[derive(Debug, Clone)]
pub struct FasticaOptions {
    pub max_iters: usize,
    /// Direction-change threshold for convergence.
    pub tol: f64,
    pub seed: u64,
}

impl Default for FasticaOptions {
    fn default() -> Self {
        FasticaOptions {
            max_iters: 200,
            tol: 1e-8,
            seed: 42,
        }
    }
}

fn sym_decorrelate(b: &Matrix) -> Result<Matrix> {
    let bbt = b.matmul(&b.transpose())?;
    sym_inv_sqrt(&bbt)?.matmul(b)
}

/// FastICA with whitening. Separates independent non-Gaussian sources;
/// on (near-)Gaussian sources the fixed point is not identifiable, so the
/// result is still returned but the correlations carry no guarantee.
/// Non-convergence is reported through `converged`, not as an error.
pub fn bss_fastica(scenario: &BssScenario, k: usize, opts: &FasticaOptions) -> Result<BssResult> {
    let c = scenario.channel_count();
    let t = scenario.sample_count();
    if k == 0 || k > c {
        return Err(Error::invalid(format!("component count {k} not in 1..={c}")));
    }
    let x = &scenario.mixtures;
    let mut mean = vec![0.0; c];
    for (i, mu) in mean.iter_mut().enumerate() {
        *mu = x.row(i).iter().sum::<f64>() / t as f64;
    }
    let xc = Matrix::from_fn(c, t, |i, j| x[(i, j)] - mean[i]);
    let mut cov = xc.matmul(&xc.transpose())?;
    cov.scale(1.0 / t as f64);
    let e = eigh(&cov)?;
    if e.values[0] <= 0.0 || e.values[k - 1] <= e.values[0] * 1e-12 {
        return Err(Error::invalid(
            "mixtures span fewer directions than requested components",
        ));
    }
    let whiten = Matrix::from_fn(k, c, |r, i| e.vectors[(i, r)] / e.values[r].sqrt());
    let z = whiten.matmul(&xc)?;

    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut b = sym_decorrelate(&Matrix::from_fn(k, k, |_, _| rng.sample(StandardNormal)))?;
    let mut converged = false;
    let mut iterations = 0;
    while iterations < opts.max_iters {
        iterations += 1;
        let y = b.matmul(&z)?;
        let mut next = Matrix::zeros(k, k);
        for i in 0..k {
            let mut gp_mean = 0.0;
            for s in 0..t {
                let g = y[(i, s)].tanh();
                gp_mean += 1.0 - g * g;
                for r in 0..k {
                    next[(i, r)] += g * z[(r, s)];
                }
            }
            gp_mean /= t as f64;
            for r in 0..k {
                next[(i, r)] = next[(i, r)] / t as f64 - gp_mean * b[(i, r)];
            }
        }
        let next = sym_decorrelate(&next)?;
        let mut delta = 0.0f64;
        for i in 0..k {
            let dot: f64 = (0..k).map(|r| next[(i, r)] * b[(i, r)]).sum();
            delta = delta.max(1.0 - dot.abs());
        }
        b = next;
        if delta < opts.tol {
            converged = true;
            break;
        }
    }

    let estimates = b.matmul(&z)?;
    // Back-projection through the unwhitening map; with orthonormal b this
    // equals the rank-k principal reconstruction.
    let dewhiten = Matrix::from_fn(c, k, |i, r| e.vectors[(i, r)] * e.values[r].sqrt());
    let recon = dewhiten.matmul(&b.transpose())?.matmul(&estimates)?;
    let x_hat = Matrix::from_fn(c, t, |i, j| recon[(i, j)] + mean[i]);
    finish("fastica", scenario, &estimates, &x_hat, converged, iterations)
}

/// CP settings tuned for the Hankel tensors this module builds.
pub fn multiway_cp_options(seed: u64) -> CpOptions {
    CpOptions {
        max_iters: 300,
        tol: 1e-9,
        seed,
        restarts: 2,
        ridge: 0.0,
        init: CpInit::Random,
    }
}

/// Hankel-tensor separation with the default rank of two components per
/// source (a real sinusoid spans a two-dimensional Hankel subspace).
pub fn bss_multiway(scenario: &BssScenario, k: usize, window: usize) -> Result<BssResult> {
    bss_multiway_opts(
        scenario,
        k,
        window,
        2 * k,
        &multiway_cp_options(scenario.seed),
    )
}

/// Hankel-tensor separation with explicit rank and CP settings.
///
/// The channels are Hankelized into a `(window, shifts, channels)` tensor
/// and CP-decomposed at the given rank. Components are grouped into one
/// cluster per source by estimated frequency (`cos w` fitted from each
/// component's dehankelized signal via the three-term recurrence), and each
/// cluster is dehankelized into a source estimate; `rank` must therefore be
/// a multiple of `k`.
pub fn bss_multiway_opts(
    scenario: &BssScenario,
    k: usize,
    window: usize,
    rank: usize,
    cp: &CpOptions,
) -> Result<BssResult> {
    let t = scenario.sample_count();
    if k == 0 {
        return Err(Error::invalid("need at least one source"));
    }
    if window == 0 || window > t {
        return Err(Error::invalid(format!(
            "window {window} not in 1..={t}"
        )));
    }
    let shifts = t - window + 1;
    if k > window.min(shifts) {
        return Err(Error::invalid(format!(
            "window {window} leaves fewer than {k} rows or shifts"
        )));
    }
    if rank == 0 || rank % k != 0 {
        return Err(Error::invalid(
            "rank must be a positive multiple of the source count",
        ));
    }

    let h = hankelize_channels(&scenario.mixtures, window)?;
    let (model, report) = cp_als(&h, rank, cp)?;

    // Per-component time signature and its fitted cos(frequency). The
    // recurrence fit is quadratic in the signal, so channel loadings and
    // signs do not disturb it.
    let a = &model.factors()[0];
    let b = &model.factors()[1];
    let channel = &model.factors()[2];
    let channels = scenario.channel_count();
    let mut signatures: Vec<Vec<f64>> = Vec::with_capacity(rank);
    let mut cos_w = Vec::with_capacity(rank);
    for r in 0..rank {
        let m = Matrix::from_fn(window, shifts, |i, j| a[(i, r)] * b[(j, r)]);
        let s = dehankelize(&m);
        let mut num = 0.0;
        let mut den = 0.0;
        for t in 1..s.len() - 1 {
            num += s[t] * (s[t - 1] + s[t + 1]);
            den += 2.0 * s[t] * s[t];
        }
        cos_w.push(if den > 0.0 { (num / den).clamp(-1.0, 1.0) } else { 2.0 });
        signatures.push(s);
    }

    let mut order: Vec<usize> = (0..rank).collect();
    order.sort_by(|&p, &q| cos_w[p].total_cmp(&cos_w[q]).then(p.cmp(&q)));
    let group = rank / k;
    let mut estimates = Matrix::zeros(k, t);
    for (g, chunk) in order.chunks(group).enumerate() {
        // The group's dehankelized footprint across channels is close to
        // rank one (mixing column times time course); its top right
        // singular vector is the source estimate. Summing signatures
        // without the channel loadings would lose each component's sign.
        let mut footprint = Matrix::zeros(channels, t);
        for &r in chunk {
            for ch in 0..channels {
                let w = model.weights()[r] * channel[(ch, r)];
                for (ti, v) in signatures[r].iter().enumerate() {
                    footprint[(ch, ti)] += w * v;
                }
            }
        }
        let d = svd(&footprint)?;
        if d.rank() > 0 {
            for (ti, v) in d.v.col(0).iter().enumerate() {
                estimates[(g, ti)] = *v;
            }
        }
    }

    let x_hat = dehankelize_channels(&model.reconstruct()?)?;
    finish(
        "multiway",
        scenario,
        &estimates,
        &x_hat,
        report.converged,
        report.iterations,
    )
}

/// Method selector for [`compare_methods`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BssMethod {
    Pca,
    FastIca,
    Multiway,
}

impl BssMethod {
    pub fn name(&self) -> &'static str {
        match self {
            BssMethod::Pca => "pca",
            BssMethod::FastIca => "fastica",
            BssMethod::Multiway => "multiway",
        }
    }
}

/// One row of a comparison: the method's result, or the error that stopped
/// it.
#[derive(Debug, Clone)]
pub struct ComparisonRow {
    pub method: String,
    pub outcome: std::result::Result<BssResult, String>,
}

/// Results of running several methods on one scenario.
#[derive(Debug, Clone)]
pub struct MethodComparison {
    pub rows: Vec<ComparisonRow>,
    source_count: usize,
}

/// Runs each method on the scenario at its true source count. Failures are
/// recorded per row instead of aborting the comparison.
pub fn compare_methods(
    scenario: &BssScenario,
    methods: &[BssMethod],
    window: usize,
) -> MethodComparison {
    let k = scenario.source_count();
    compare_methods_opts(
        scenario,
        methods,
        window,
        2 * k,
        &multiway_cp_options(scenario.seed),
    )
}

/// [`compare_methods`] with explicit multiway rank and CP settings.
pub fn compare_methods_opts(
    scenario: &BssScenario,
    methods: &[BssMethod],
    window: usize,
    rank: usize,
    cp: &CpOptions,
) -> MethodComparison {
    let k = scenario.source_count();
    let rows = methods
        .iter()
        .map(|m| {
            let outcome = match m {
                BssMethod::Pca => bss_pca(scenario, k),
                BssMethod::FastIca => bss_fastica(scenario, k, &FasticaOptions::default()),
                BssMethod::Multiway => bss_multiway_opts(scenario, k, window, rank, cp),
            };
            ComparisonRow {
                method: m.name().to_string(),
                outcome: outcome.map_err(|e| e.to_string()),
            }
        })
        .collect();
    MethodComparison {
        rows,
        source_count: k,
    }
}

impl MethodComparison {
    /// Metric table: one row per method with residual, convergence, and the
    /// aligned per-source absolute correlations.
    pub fn metrics_csv(&self) -> String {
        let mut out = String::from("method,status,residual,converged,iterations");
        for i in 1..=self.source_count {
            out.push_str(&format!(",corr_{i}"));
        }
        out.push('\n');
        for row in &self.rows {
            match &row.outcome {
                Ok(r) => {
                    out.push_str(&format!(
                        "{},ok,{},{},{}",
                        row.method,
                        format_g17(r.residual),
                        r.converged,
                        r.iterations
                    ));
                    for &c in &r.correlations {
                        out.push_str(&format!(",{}", format_g17(c)));
                    }
                }
                Err(e) => {
                    let msg = e.replace([',', '\n'], ";");
                    out.push_str(&format!("{},{msg},,,", row.method));
                    for _ in 0..self.source_count {
                        out.push(',');
                    }
                }
            }
            out.push('\n');
        }
        out
    }

    /// Per-sample table for plotting: true sources, mixtures, and each
    /// successful method's aligned estimates.
    pub fn signals_csv(&self, scenario: &BssScenario) -> String {
        let k = scenario.source_count();
        let c = scenario.channel_count();
        let t = scenario.sample_count();
        let mut out = String::from("t");
        for i in 1..=k {
            out.push_str(&format!(",source_{i}"));
        }
        for i in 1..=c {
            out.push_str(&format!(",mixture_{i}"));
        }
        let ok_rows: Vec<&BssResult> = self
            .rows
            .iter()
            .filter_map(|r| r.outcome.as_ref().ok())
            .collect();
        for r in &ok_rows {
            for i in 1..=k {
                out.push_str(&format!(",{}_est_{i}", r.method));
            }
        }
        out.push('\n');
        for s in 0..t {
            out.push_str(&format!("{s}"));
            for i in 0..k {
                out.push_str(&format!(",{}", format_g17(scenario.sources[(i, s)])));
            }
            for i in 0..c {
                out.push_str(&format!(",{}", format_g17(scenario.mixtures[(i, s)])));
            }
            for r in &ok_rows {
                for i in 0..k {
                    out.push_str(&format!(",{}", format_g17(r.estimates[(i, s)])));
                }
            }
            out.push('\n');
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn default_scenario() -> BssScenario {
        generate_scenario(&ScenarioSpec::default()).unwrap()
    }

    fn small_scenario() -> BssScenario {
        generate_scenario(&ScenarioSpec {
            samples: 240,
            ..ScenarioSpec::default()
        })
        .unwrap()
    }

    #[test]
    fn identity_mixing_passes_the_source_through() {
        let spec = ScenarioSpec {
            sources: vec![SourceKind::Sinusoid { omega: 0.5 }],
            channels: 1,
            samples: 64,
            noise: 0.0,
            seed: 7,
        };
        let generated = generate_scenario(&spec).unwrap();
        let scenario =
            BssScenario::from_parts(generated.sources.clone(), Matrix::identity(1), 7).unwrap();
        for (a, b) in scenario.mixtures.data().iter().zip(scenario.sources.data()) {
            assert_eq!(a.to_bits(), b.to_bits());
        }
    }

    #[test]
    fn default_sinusoids_are_nearly_uncorrelated_and_unit_power() {
        let s = default_scenario();
        let rho = pearson(s.sources.row(0), s.sources.row(1));
        assert!(rho.abs() < 0.05, "cross-correlation {rho}");
        for i in 0..2 {
            let ms = s.sources.row(i).iter().map(|v| v * v).sum::<f64>() / 400.0;
            assert!((ms - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn scenarios_are_bit_identical_for_a_seed() {
        let a = default_scenario();
        let b = default_scenario();
        for (x, y) in a.mixtures.data().iter().zip(b.mixtures.data()) {
            assert_eq!(x.to_bits(), y.to_bits());
        }
        let ra = bss_fastica(&a, 2, &FasticaOptions::default()).unwrap();
        let rb = bss_fastica(&b, 2, &FasticaOptions::default()).unwrap();
        for (x, y) in ra.estimates.data().iter().zip(rb.estimates.data()) {
            assert_eq!(x.to_bits(), y.to_bits());
        }
    }

    #[test]
    fn bad_specs_are_rejected() {
        let base = ScenarioSpec::default();
        let too_few_channels = ScenarioSpec {
            channels: 1,
            ..base.clone()
        };
        assert!(generate_scenario(&too_few_channels).is_err());
        let repeated = ScenarioSpec {
            sources: vec![
                SourceKind::Sinusoid { omega: 0.4 },
                SourceKind::Sinusoid { omega: 0.4 },
            ],
            ..base.clone()
        };
        assert!(generate_scenario(&repeated).is_err());
        let out_of_band = ScenarioSpec {
            sources: vec![SourceKind::Sinusoid { omega: 4.0 }],
            channels: 1,
            ..base
        };
        assert!(generate_scenario(&out_of_band).is_err());
    }

    #[test]
    fn single_channel_pca_and_ica_recover_the_source_exactly() {
        let spec = ScenarioSpec {
            sources: vec![SourceKind::Sinusoid { omega: 0.5 }],
            channels: 1,
            samples: 128,
            noise: 0.0,
            seed: 3,
        };
        let s = generate_scenario(&spec).unwrap();
        let p = bss_pca(&s, 1).unwrap();
        assert!(p.correlations[0] > 1.0 - 1e-10);
        let f = bss_fastica(&s, 1, &FasticaOptions::default()).unwrap();
        assert!(f.correlations[0] > 1.0 - 1e-10);
    }

    #[test]
    fn full_basis_pca_reconstructs_the_mixtures() {
        let s = default_scenario();
        let r = bss_pca(&s, 3).unwrap();
        assert!(r.residual < 1e-10, "residual {}", r.residual);
        assert_eq!(r.correlations.len(), 2);
    }

    #[test]
    fn fastica_separates_heavy_tailed_sources() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let t = 2000;
        let mut sources = Matrix::from_fn(2, t, |_, _| {
            let u: f64 = rng.random::<f64>() - 0.5;
            -u.signum() * (1.0 - 2.0 * u.abs()).ln() / std::f64::consts::SQRT_2
        });
        for i in 0..2 {
            unit_power(sources.row_mut(i));
        }
        let (c, s) = (0.6f64.cos(), 0.6f64.sin());
        let mixing = Matrix::from_rows(&[vec![c, -s], vec![s, c]]).unwrap();
        let scenario = BssScenario::from_parts(sources, mixing, 11).unwrap();
        let r = bss_fastica(&scenario, 2, &FasticaOptions::default()).unwrap();
        assert!(r.converged);
        for (i, rho) in r.correlations.iter().enumerate() {
            assert!(*rho > 0.95, "source {i}: correlation {rho}");
        }
    }

    #[test]
    fn gaussian_sources_still_produce_finite_metrics() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let mut sources = Matrix::from_fn(2, 1000, |_, _| rng.sample(StandardNormal));
        for i in 0..2 {
            unit_power(sources.row_mut(i));
        }
        let mixing = Matrix::from_fn(2, 2, |_, _| rng.sample(StandardNormal));
        let scenario = BssScenario::from_parts(sources, mixing, 13).unwrap();
        let r = bss_fastica(&scenario, 2, &FasticaOptions::default()).unwrap();
        assert!(r.residual.is_finite());
        for rho in &r.correlations {
            assert!((0.0..=1.0).contains(rho));
        }
    }

    #[test]
    fn alignment_is_invariant_to_sign_and_order() {
        let s = default_scenario();
        let flipped = Matrix::from_fn(2, 400, |i, t| -s.sources[(1 - i, t)]);
        let corrs = align_correlations(&s.sources, &flipped).unwrap();
        for rho in corrs {
            assert!(rho > 1.0 - 1e-12);
        }
    }

    #[test]
    fn hankel_slices_stay_constant_along_antidiagonals() {
        let s = small_scenario();
        let h = hankelize_channels(&s.mixtures, 40).unwrap();
        let dims = h.shape().dims().to_vec();
        for c in 0..dims[2] {
            for i in 1..dims[0] {
                for j in 1..dims[1] {
                    let a = h.get(&[i, j - 1, c]).unwrap();
                    let b = h.get(&[i - 1, j, c]).unwrap();
                    assert_eq!(a.to_bits(), b.to_bits());
                }
            }
        }
    }

    #[test]
    fn multiway_recovers_a_single_sinusoid_from_one_channel() {
        let spec = ScenarioSpec {
            sources: vec![SourceKind::Sinusoid { omega: 0.7 }],
            channels: 1,
            samples: 120,
            noise: 0.0,
            seed: 5,
        };
        let s = generate_scenario(&spec).unwrap();
        let r = bss_multiway(&s, 1, 60).unwrap();
        assert!(r.correlations[0] > 0.99, "correlation {}", r.correlations[0]);
    }

    #[test]
    fn multiway_separates_the_default_pair_of_sinusoids() {
        let s = default_scenario();
        let r = bss_multiway(&s, 2, 200).unwrap();
        for (i, rho) in r.correlations.iter().enumerate() {
            assert!(*rho > 0.95, "source {i}: correlation {rho}");
        }
        assert!(r.residual < 0.05, "residual {}", r.residual);
    }

    #[test]
    fn comparison_runs_every_method_and_orders_correlations() {
        let s = small_scenario();
        let all = [BssMethod::Pca, BssMethod::FastIca, BssMethod::Multiway];
        let cmp = compare_methods(&s, &all, 120);
        assert_eq!(cmp.rows.len(), 3);
        let mut means = std::collections::HashMap::new();
        for row in &cmp.rows {
            let r = row.outcome.as_ref().expect("method failed");
            assert!(r.residual.is_finite());
            let mean = r.correlations.iter().sum::<f64>() / r.correlations.len() as f64;
            means.insert(row.method.clone(), mean);
        }
        assert!(means["multiway"] >= means["pca"]);
        let csv = cmp.metrics_csv();
        assert_eq!(csv.lines().count(), 4);
        assert!(csv.starts_with("method,status,residual,converged,iterations,corr_1,corr_2"));
        let signals = cmp.signals_csv(&s);
        let header = signals.lines().next().unwrap();
        assert_eq!(
            header,
            "t,source_1,source_2,mixture_1,mixture_2,mixture_3,\
             pca_est_1,pca_est_2,fastica_est_1,fastica_est_2,multiway_est_1,multiway_est_2"
        );
        assert_eq!(signals.lines().count(), 241);
    }

    #[test]
    fn empty_method_list_gives_a_header_only_table() {
        let s = small_scenario();
        let cmp = compare_methods(&s, &[], 120);
        let csv = cmp.metrics_csv();
        assert_eq!(csv.lines().count(), 1);
    }
}
