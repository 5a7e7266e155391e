//! Fitting a new task through learned features, with a full-dimensional
//! regression as the reference.

use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::linalg::{self, axpy, FeatureMatrix};
use crate::model::DataSet;

#[derive(Debug, Clone, PartialEq)]
pub struct TransferFit {
    /// Coefficients in learned-feature coordinates.
    pub alpha_hat: Vec<f64>,
    /// `B̂ α̂`.
    pub beta_hat: Vec<f64>,
    /// `‖B̂ α̂ − B α‖²`.
    pub param_error_sq: f64,
    /// Same metric for minimum-norm least squares in all `d` coordinates.
    pub baseline_error_sq: f64,
}

/// `α̂ = (Σ B̂ᵀx_i x_iᵀB̂)† B̂ᵀ Σ x_i y_i`, computed as the minimum-norm least
/// squares solution on the reduced design `X B̂`.
pub fn fit_new_task(features: &FeatureMatrix, data: &DataSet) -> Result<Vec<f64>> {
    if features.dim() != data.dim() {
        return Err(Error::DimensionMismatch("feature dimension differs from covariates"));
    }
    let reduced = data.covariates().matmul(features.basis())?;
    linalg::least_squares(&reduced, data.responses())
}

/// Minimum-norm least squares on the raw covariates.
pub fn baseline_fit(data: &DataSet) -> Result<Vec<f64>> {
    linalg::least_squares(data.covariates(), data.responses())
}

fn dist_sq(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

pub fn evaluate_transfer(
    true_features: &FeatureMatrix,
    true_alpha: &[f64],
    learned_features: &FeatureMatrix,
    new_data: &DataSet,
) -> Result<TransferFit> {
    if true_features.dim() != learned_features.dim() {
        return Err(Error::DimensionMismatch("true and learned features differ in dimension"));
    }
    let beta = true_features.basis().mul_vec(true_alpha)?;
    let alpha_hat = fit_new_task(learned_features, new_data)?;
    let beta_hat = learned_features.basis().mul_vec(&alpha_hat)?;
    let baseline = baseline_fit(new_data)?;
    Ok(TransferFit {
        param_error_sq: dist_sq(&beta_hat, &beta),
        baseline_error_sq: dist_sq(&baseline, &beta),
        alpha_hat,
        beta_hat,
    })
}

/// `B α` for a coefficient vector in feature coordinates.
pub fn lift(features: &FeatureMatrix, alpha: &[f64]) -> Result<Vec<f64>> {
    if alpha.len() != features.rank() {
        return Err(Error::DimensionMismatch("coefficient length must equal rank"));
    }
    let mut out = alloc::vec![0.0; features.dim()];
    for (j, &a) in alpha.iter().enumerate() {
        axpy(a, &features.basis().column(j), &mut out);
    }
    Ok(out)
}
