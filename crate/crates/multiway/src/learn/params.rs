use crate::error::{Error, Result};

/// Coefficient structure of a tensor-input linear model.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModelKind {
    Cp,
    Tucker,
    Vectorized,
}

impl ModelKind {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "cp" => Ok(ModelKind::Cp),
            "tucker" => Ok(ModelKind::Tucker),
            "vectorized" => Ok(ModelKind::Vectorized),
            other => Err(Error::invalid(format!(
                "unknown model kind {other:?}; expected cp, tucker, or vectorized"
            ))),
        }
    }
}

/// Whether to count stored scalars or only identifiable degrees of freedom.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CountMode {
    /// Every stored scalar.
    Raw,
    /// Raw minus the dimension of the model's invariance group: per-component
    /// rescalings for CP, per-mode orthogonal transforms for Tucker.
    Effective,
}

impl CountMode {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "raw" => Ok(CountMode::Raw),
            "effective" => Ok(CountMode::Effective),
            other => Err(Error::invalid(format!(
                "unknown count mode {other:?}; expected raw or effective"
            ))),
        }
    }
}

fn wide_product(values: &[usize]) -> Result<u128> {
    let mut p: u128 = 1;
    for &v in values {
        p = p
            .checked_mul(v as u128)
            .ok_or_else(|| Error::invalid("parameter count overflows u128"))?;
    }
    Ok(p)
}

/// Number of parameters of a tensor-coefficient regression model with the
/// given input extents, structural ranks, and covariate count.
///
/// - vectorized: `prod(dims) + covariates`
/// - cp (one rank R): raw `R * sum(dims) + covariates`; effective subtracts
///   the `R * (N - 1)` scale indeterminacies
/// - tucker (one rank per mode): raw `sum(dims[n] * ranks[n]) + prod(ranks)
///   + covariates`; effective subtracts `sum(ranks[n]^2)` for the per-mode
///   rotation indeterminacies
pub fn param_count(
    kind: ModelKind,
    dims: &[usize],
    ranks: &[usize],
    covariates: usize,
    mode: CountMode,
) -> Result<u128> {
    if dims.is_empty() {
        return Err(Error::invalid("at least one input mode is required"));
    }
    if dims.iter().any(|&d| d == 0) {
        return Err(Error::invalid("every mode extent must be positive"));
    }
    let n = dims.len() as u128;
    let sum_dims: u128 = dims.iter().map(|&d| d as u128).sum();
    let c = covariates as u128;

    match kind {
        ModelKind::Vectorized => {
            if !ranks.is_empty() {
                return Err(Error::invalid("a vectorized model takes no ranks"));
            }
            Ok(wide_product(dims)? + c)
        }
        ModelKind::Cp => {
            let [r] = ranks else {
                return Err(Error::invalid("a CP model takes exactly one rank"));
            };
            if *r == 0 {
                return Err(Error::invalid("CP rank must be at least 1"));
            }
            let r = *r as u128;
            let raw = r * sum_dims + c;
            Ok(match mode {
                CountMode::Raw => raw,
                CountMode::Effective => raw - r * (n - 1),
            })
        }
        ModelKind::Tucker => {
            if ranks.len() != dims.len() {
                return Err(Error::invalid(format!(
                    "{} ranks given for {} modes",
                    ranks.len(),
                    dims.len()
                )));
            }
            for (i, (&r, &d)) in ranks.iter().zip(dims).enumerate() {
                if r == 0 || r > d {
                    return Err(Error::invalid(format!(
                        "rank {r} for mode {i} is not in 1..={d}"
                    )));
                }
            }
            let factor_sum: u128 = dims
                .iter()
                .zip(ranks)
                .map(|(&d, &r)| d as u128 * r as u128)
                .sum();
            let core = wide_product(ranks)?;
            let raw = factor_sum + core + c;
            Ok(match mode {
                CountMode::Raw => raw,
                CountMode::Effective => {
                    let rotations: u128 = ranks.iter().map(|&r| (r * r) as u128).sum();
                    raw - rotations
                }
            })
        }
    }
}
