//! First-order treatment of the market-aligned eigenpair.
//!
//! With `eps = sum_i gamma_i^2 beta_hat_i^2` the major eigenvalue is
//! `1 + eps` and its eigenvector is `(1 + gamma_i^2 - eps) beta_hat_i`.
//! Against `solve_exact` the eigenvalue error is second order: the relative
//! error equals the `beta_hat^2`-weighted variance of `gamma^2`, which falls
//! like `N^-2` when `gamma^2 ~ 1/N`.
//!
//! The market-aligned portfolio variance is expanded to the same order:
//!
//! ```text
//! V_N^2 = [1 + 3 eps - 2 S1 / S0] (beta.beta) market_var / S0^2
//! S0 = sum beta_hat_i,  S1 = sum gamma_i^2 beta_hat_i
//! ```
//!
//! The coefficient of `S1 / S0` is 2 because `W_N^2` carries twice the
//! first-order weight shift. With it the remaining error is second order in
//! `gamma^2`, and the constant-residual case is reproduced exactly. The
//! return-adjusted volatility keeps only the first-order alpha correction,
//!
//! ```text
//! Vcheck_N = {1 - (sd_m / mean_m) sum_i a_i beta_hat_i} sd_m / mean_m
//! a_i = alpha_mean_i / sqrt(scale)
//! ```
//!
//! and so differs from the exact value by about `eps / 2` relative, the
//! dropped eigenvalue shift.

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use super::{normalize, stats_for_vector, Method, MinorSummary, PrincipalDecomposition};
use crate::covariance::CovariancePair;
use crate::error::{Error, Result};

pub fn solve_perturbative(cp: &CovariancePair) -> PrincipalDecomposition {
    let n = cp.len();
    let eps: f64 = cp
        .gamma_sq
        .iter()
        .zip(cp.beta_hat.iter())
        .map(|(g, b)| g * b * b)
        .sum();
    let value = 1.0 + eps;
    let mut e = DVector::from_iterator(
        n,
        cp.gamma_sq
            .iter()
            .zip(cp.beta_hat.iter())
            .map(|(g, b)| (1.0 + g - eps) * b),
    );
    normalize(&mut e);
    if e.sum() < 0.0 {
        e = -e;
    }

    let sv = cp.apply_tilde(e.as_slice());
    let residual = sv
        .iter()
        .zip(e.iter())
        .map(|(s, x)| (s - value * x).powi(2))
        .sum::<f64>()
        .sqrt();
    let stats = stats_for_vector(
        e.as_slice(),
        value,
        cp,
        &cp.expected_returns,
        n,
        true,
        super::SpectralTolerances::default().critical_weight,
    );
    let minor_summary = (n > 1).then(|| MinorSummary {
        average_variance: (cp.trace() - cp.scale * value) / (n - 1) as f64,
        approximation: super::minor_approximation(cp),
    });
    PrincipalDecomposition {
        method: Method::Perturbative,
        eigenvalues_tilde: vec![value],
        eigenvectors: nalgebra::DMatrix::from_column_slice(n, 1, e.as_slice()),
        portfolios: vec![stats],
        residual,
        scale: cp.scale,
        minor_summary,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MarketAlignedStats {
    /// First-order `V_N^2`.
    pub portfolio_variance: f64,
    /// Leading order `(N b^2 / W_N^2) market_var`, `W_N` from the eigenvector.
    pub leading_order_variance: f64,
    /// First-order `e^N_i / W_N`; sums to one.
    pub composition: Vec<f64>,
    /// First-order return-adjusted volatility.
    pub return_adjusted_volatility: f64,
}

pub fn market_aligned_stats(
    cp: &CovariancePair,
    decomp: &PrincipalDecomposition,
) -> Result<MarketAlignedStats> {
    if decomp.method != Method::Perturbative {
        return Err(Error::WrongMethod {
            expected: "perturbative",
        });
    }
    let n = cp.len();
    let bh = &cp.beta_hat;
    let g = &cp.gamma_sq;
    let s0: f64 = bh.sum();
    let s1: f64 = g.iter().zip(bh.iter()).map(|(g, b)| g * b).sum();
    let eps: f64 = g.iter().zip(bh.iter()).map(|(g, b)| g * b * b).sum();
    let beta_dot = cp.b_sq * n as f64;

    let portfolio_variance =
        (1.0 + 3.0 * eps - 2.0 * s1 / s0) * beta_dot * cp.market_var / (s0 * s0);
    let composition: Vec<f64> = g
        .iter()
        .zip(bh.iter())
        .map(|(g, b)| (1.0 + g - s1 / s0) * b / s0)
        .collect();

    let w_n = decomp.market_aligned().weight;
    let leading_order_variance = beta_dot * cp.market_var / (w_n * w_n);

    let ratio = cp.market_var.sqrt() / cp.market_mean;
    let root_scale = cp.scale.sqrt();
    let alpha_term: f64 = cp
        .alpha_means
        .iter()
        .zip(bh.iter())
        .map(|(a, b)| a / root_scale * b)
        .sum();
    let return_adjusted_volatility = (1.0 - ratio * alpha_term) * ratio;

    Ok(MarketAlignedStats {
        portfolio_variance,
        leading_order_variance,
        composition,
        return_adjusted_volatility,
    })
}
