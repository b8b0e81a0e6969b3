use crate::error::{Error, Result};

/// Vector norm selector.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PNorm {
    One,
    Two,
    Infinity,
}

/// p-norm of a vector for p in {1, 2, infinity}.
pub fn vector_norm(v: &[f64], p: PNorm) -> Result<f64> {
    if v.is_empty() {
        return Err(Error::invalid("vector norm of an empty vector"));
    }
    Ok(match p {
        PNorm::One => v.iter().map(|x| x.abs()).sum(),
        PNorm::Two => v.iter().map(|x| x * x).sum::<f64>().sqrt(),
        PNorm::Infinity => v.iter().map(|x| x.abs()).fold(0.0, f64::max),
    })
}
