//! Supervised learning with tensor-shaped inputs: regression with CP- or
//! Tucker-structured coefficients, parameter counting for those structures,
//! and completion of partially observed tensors.

mod complete;
mod params;
mod regress;

pub use complete::{
    completed_tensor, cp_complete, CompletionOptions, FillPolicy, ObservationMask,
};
pub use params::{param_count, CountMode, ModelKind};
pub use regress::{
    cp_regression_fit, regress_predict, tucker_regression_fit, CoefficientModel, CpRegression,
    RegressionOptions, RegressionSample, TuckerRegression,
};
