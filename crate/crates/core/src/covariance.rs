//! Single-index covariance and its dimensionless rescaling.
//!
//! `sigma_ij = residual_var_i * delta_ij + beta_i * beta_j * market_var` and
//! `sigma = scale * sigma_tilde` with `scale = sum(beta^2) * market_var`, so
//! that `sigma_tilde = diag(gamma_sq) + beta_hat * beta_hat^T` with
//! `beta_hat` a unit vector. Spectral formulas work in the tilde variables;
//! `scale` converts back to rate units.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::universe::AssetUniverse;

#[derive(Debug, Clone)]
pub struct CovariancePair {
    pub sigma: DMatrix<f64>,
    pub sigma_tilde: DMatrix<f64>,
    pub beta_hat: DVector<f64>,
    pub gamma_sq: DVector<f64>,
    /// Mean squared beta.
    pub b_sq: f64,
    /// `N * b_sq * market_var`.
    pub scale: f64,
    pub betas: Vec<f64>,
    pub residual_vars: Vec<f64>,
    pub alpha_means: Vec<f64>,
    pub expected_returns: Vec<f64>,
    pub market_mean: f64,
    pub market_var: f64,
}

pub fn build_covariance(u: &AssetUniverse) -> Result<CovariancePair> {
    let n = u.len();
    let betas = u.betas();
    let residual_vars = u.residual_vars();
    let beta_sq: f64 = betas.iter().map(|b| b * b).sum();
    if beta_sq == 0.0 {
        return Err(Error::AllBetasZero);
    }
    if u.market_var <= 0.0 || !u.market_var.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "market_var must be positive, got {}",
            u.market_var
        )));
    }
    let norm = beta_sq.sqrt();
    let scale = beta_sq * u.market_var;
    let beta_hat = DVector::from_iterator(n, betas.iter().map(|b| b / norm));
    let gamma_sq = DVector::from_iterator(n, residual_vars.iter().map(|v| v / scale));

    let sigma = DMatrix::from_fn(n, n, |i, j| {
        let market = betas[i] * betas[j] * u.market_var;
        if i == j {
            residual_vars[i] + market
        } else {
            market
        }
    });
    let sigma_tilde = DMatrix::from_fn(n, n, |i, j| {
        let market = beta_hat[i] * beta_hat[j];
        if i == j {
            gamma_sq[i] + market
        } else {
            market
        }
    });

    Ok(CovariancePair {
        sigma,
        sigma_tilde,
        beta_hat,
        gamma_sq,
        b_sq: beta_sq / n as f64,
        scale,
        betas,
        residual_vars,
        alpha_means: u.alpha_means(),
        expected_returns: u.expected_returns(),
        market_mean: u.market_mean,
        market_var: u.market_var,
    })
}

impl CovariancePair {
    pub fn len(&self) -> usize {
        self.betas.len()
    }

    pub fn is_empty(&self) -> bool {
        self.betas.is_empty()
    }

    /// `sqrt(sum beta^2)`.
    pub fn beta_norm(&self) -> f64 {
        (self.b_sq * self.len() as f64).sqrt()
    }

    pub fn trace_tilde(&self) -> f64 {
        1.0 + self.gamma_sq.sum()
    }

    pub fn trace(&self) -> f64 {
        self.residual_vars.iter().sum::<f64>() + self.scale
    }

    /// `sigma_tilde * v` from the diagonal-plus-rank-one structure, O(N).
    pub fn apply_tilde(&self, v: &[f64]) -> Vec<f64> {
        let proj: f64 = self.beta_hat.iter().zip(v).map(|(b, x)| b * x).sum();
        v.iter()
            .zip(self.gamma_sq.iter().zip(self.beta_hat.iter()))
            .map(|(x, (g, b))| g * x + proj * b)
            .collect()
    }
}
