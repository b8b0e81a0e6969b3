//! `multiway`: tensorize tabular and signal data, fit tensor decompositions,
//! and run the related regression, completion, compression, and source
//! separation tools from the command line.

mod commands;
mod config;

use clap::{Args, Parser, Subcommand};

#[derive(Parser)]
#[command(
    name = "multiway",
    version,
    about = "Tensor decomposition and multiway analysis toolkit",
    after_help = "Options may also come from a `key = value` config file \
(key `<subcommand>.<flag>`); command-line flags take precedence. Each run \
writes the options it used to `resolved.config` in the output directory, \
and that file can be passed back via --config to reproduce the run."
)]
pub struct Cli {
    /// Configuration file with `<subcommand>.<flag> = value` lines.
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<String>,
    /// Directory for output artifacts (created if missing).
    #[arg(long, global = true, value_name = "DIR")]
    pub out: Option<String>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand)]
pub enum Command {
    /// Count the parameters of a tensor model architecture.
    Params(ParamsArgs),
    /// Column norms, central moments, cumulant and lagged-covariance tensors of a CSV.
    Stats(StatsArgs),
    /// Pivot a CSV table into a sparse tensor according to a plan file.
    Tensorize(TensorizeArgs),
    /// Fit a CP, Tucker, or tensor-train decomposition to a tensor.
    Decompose(DecomposeArgs),
    /// Fit a CP or Tucker regression from a sample manifest.
    Regress(RegressArgs),
    /// Fill the missing entries of a partially observed tensor with a CP model.
    Complete(CompleteArgs),
    /// Stack sliding windows of multichannel signals into a tensor.
    Hankelize(HankelizeArgs),
    /// Factor a dense weight matrix into a tensor-train layer.
    TtCompress(TtCompressArgs),
    /// Generate a source-separation scenario and compare recovery methods.
    BssDemo(BssDemoArgs),
}

#[derive(Args)]
pub struct ParamsArgs {
    /// Model kind: cp, tucker, or vectorized.
    #[arg(long)]
    pub kind: Option<String>,
    /// Input mode sizes, e.g. 128,128,128.
    #[arg(long)]
    pub dims: Option<String>,
    /// CP rank or per-mode Tucker ranks; empty for vectorized.
    #[arg(long)]
    pub rank: Option<String>,
    /// Number of scalar side features (default 0).
    #[arg(long)]
    pub covariates: Option<usize>,
    /// Counting mode: raw or effective (default raw).
    #[arg(long)]
    pub mode: Option<String>,
}

#[derive(Args)]
pub struct StatsArgs {
    /// CSV file; rows are observations, columns are variables.
    #[arg(long)]
    pub input: Option<String>,
    /// Print and record the 1-, 2-, and infinity-norm of every column.
    #[arg(long)]
    pub norms: bool,
    /// Central moments of every column up to this order.
    #[arg(long, value_name = "ORDER")]
    pub moments: Option<usize>,
    /// Write the joint cumulant tensor of this order (3 or 4).
    #[arg(long, value_name = "ORDER")]
    pub cumulant: Option<usize>,
    /// Write lagged covariance matrices stacked over these lags, e.g. 0,1,2.
    #[arg(long, value_name = "LAGS")]
    pub scov: Option<String>,
}

#[derive(Args)]
pub struct TensorizeArgs {
    /// CSV table to pivot.
    #[arg(long)]
    pub input: Option<String>,
    /// Plan file with axis.N.column, axis.N.mapping, value.column,
    /// and value.aggregation keys.
    #[arg(long)]
    pub plan: Option<String>,
}

#[derive(Args)]
pub struct DecomposeArgs {
    /// Tensor in text format.
    #[arg(long)]
    pub input: Option<String>,
    /// Decomposition kind: cp, tucker, or tt.
    #[arg(long)]
    pub kind: Option<String>,
    /// CP rank, per-mode Tucker ranks, or tensor-train rank caps.
    #[arg(long)]
    pub rank: Option<String>,
    /// Convergence tolerance (tt: relative error budget).
    #[arg(long)]
    pub tol: Option<f64>,
    /// Iteration cap for cp and tucker.
    #[arg(long)]
    pub max_iters: Option<usize>,
    /// Independently seeded restarts for cp.
    #[arg(long)]
    pub restarts: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Ridge added to the cp least-squares systems.
    #[arg(long)]
    pub ridge: Option<f64>,
    /// cp initialization: random or hosvd.
    #[arg(long)]
    pub init: Option<String>,
}

#[derive(Args)]
pub struct RegressArgs {
    /// Manifest CSV: tensor file, covariate columns, response.
    #[arg(long)]
    pub samples: Option<String>,
    /// Coefficient model: cp or tucker.
    #[arg(long)]
    pub kind: Option<String>,
    /// CP rank or per-mode Tucker ranks.
    #[arg(long)]
    pub rank: Option<String>,
    /// Ridge strength (default 1e-6).
    #[arg(long)]
    pub lambda: Option<f64>,
    /// Sweep cap (default 100).
    #[arg(long)]
    pub sweeps: Option<usize>,
    #[arg(long)]
    pub tol: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Args)]
pub struct CompleteArgs {
    /// Observed entries as a sparse tensor file.
    #[arg(long)]
    pub input: Option<String>,
    /// Indicator tensor marking observed cells; defaults to the stored
    /// entries of the input.
    #[arg(long)]
    pub mask: Option<String>,
    /// CP rank of the completion model.
    #[arg(long)]
    pub rank: Option<usize>,
    #[arg(long)]
    pub max_iters: Option<usize>,
    #[arg(long)]
    pub tol: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Ridge added to each row solve (default 1e-12).
    #[arg(long)]
    pub ridge: Option<f64>,
    /// Independently seeded restarts; the best fit wins.
    #[arg(long)]
    pub restarts: Option<usize>,
    /// First-run initialization: hosvd (spectral, from the zero-filled
    /// tensor) or random.
    #[arg(long)]
    pub init: Option<String>,
    /// keep: observed cells keep their values; model: model values everywhere.
    #[arg(long)]
    pub fill: Option<String>,
}

#[derive(Args)]
pub struct HankelizeArgs {
    /// CSV file; each column is one channel.
    #[arg(long)]
    pub input: Option<String>,
    /// Window length (rows of each Hankel slice).
    #[arg(long)]
    pub window: Option<usize>,
}

#[derive(Args)]
pub struct TtCompressArgs {
    /// Weight matrix as a 2-way tensor file (rows = outputs).
    #[arg(long)]
    pub weights: Option<String>,
    /// Bias as a 1-way tensor file; defaults to zeros.
    #[arg(long)]
    pub bias: Option<String>,
    /// Factorization of the input size, e.g. 4,8,8,4.
    #[arg(long)]
    pub input_dims: Option<String>,
    /// Factorization of the output size, matching --input-dims in length.
    #[arg(long)]
    pub output_dims: Option<String>,
    /// Per-bond rank caps.
    #[arg(long)]
    pub max_ranks: Option<String>,
    /// Relative error budget instead of rank caps.
    #[arg(long)]
    pub tol: Option<f64>,
}

#[derive(Args)]
pub struct BssDemoArgs {
    /// Source frequencies in radians per sample (default 0.3,0.8).
    #[arg(long)]
    pub freqs: Option<String>,
    /// Per-source exponential decay rates; 0 means a pure sinusoid.
    #[arg(long)]
    pub decays: Option<String>,
    /// Number of observation channels (default 3).
    #[arg(long)]
    pub channels: Option<usize>,
    /// Number of time samples (default 400).
    #[arg(long)]
    pub samples: Option<usize>,
    /// Additive channel noise standard deviation (default 0).
    #[arg(long)]
    pub noise: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Hankel window length (default samples/2).
    #[arg(long)]
    pub window: Option<usize>,
    /// CP rank for the multiway method (default twice the source count).
    #[arg(long)]
    pub rank: Option<usize>,
    /// Comma-separated subset of pca, fastica, multiway (default all).
    #[arg(long)]
    pub methods: Option<String>,
}

fn main() {
    let cli = Cli::parse();
    let code = match commands::dispatch(&cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {}", e.message());
            e.exit_code()
        }
    };
    std::process::exit(code);
}
