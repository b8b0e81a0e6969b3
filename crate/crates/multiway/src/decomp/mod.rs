//! Low-rank tensor decompositions: CP by alternating least squares, Tucker
//! by HOSVD and HOEVD-style orthogonal iteration, and tensor trains by
//! sequential truncated SVD.

mod cp;
mod tt;
mod tucker;

pub use cp::{cp_als, cp_reconstruct, CpInit, CpModel, CpOptions};
pub use tt::{tt_reconstruct, tt_svd, TtModel, TtTruncation};
pub use tucker::{hooi, hosvd, tucker_reconstruct, TuckerModel, TuckerOptions};

pub(crate) use cp::{finalize_cp, init_factors, khatri_rao_chain, normalize_columns};

use crate::error::{Error, Result};
use crate::tensor::DenseTensor;

/// Progress record of an iterative (or staged) fit.
#[derive(Debug, Clone)]
pub struct FitReport {
    /// One entry per iteration; the meaning is the fitting objective of the
    /// algorithm that produced it (relative reconstruction error for
    /// decompositions, penalized mean squared error for regressions).
    pub errors: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
    /// For tensor-train fits: discarded singular mass per truncation step.
    pub step_truncation: Vec<f64>,
}

impl FitReport {
    pub fn final_error(&self) -> f64 {
        self.errors.last().copied().unwrap_or(f64::NAN)
    }
}

/// Relative reconstruction error `||t - approx||_F / ||t||_F`.
pub fn relative_error(t: &DenseTensor, approx: &DenseTensor) -> Result<f64> {
    let norm = t.frobenius_norm();
    if norm == 0.0 {
        return Err(Error::invalid(
            "relative error is undefined for a zero reference tensor",
        ));
    }
    Ok(t.sub(approx)?.frobenius_norm() / norm)
}

/// Final CP fit error for each candidate rank, in the given order.
pub fn rank_sweep(
    t: &DenseTensor,
    ranks: &[usize],
    opts: &CpOptions,
) -> Result<Vec<(usize, f64)>> {
    let mut out = Vec::with_capacity(ranks.len());
    for &r in ranks {
        let (_, report) = cp_als(t, r, opts)?;
        out.push((r, report.final_error()));
    }
    Ok(out)
}
