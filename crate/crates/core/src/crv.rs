//! Closed-form spectrum when every asset has the same residual variance.
//!
//! The rescaled covariance is `gamma^2 I + beta_hat beta_hat^T`: one major
//! eigenvalue `1 + gamma^2` with eigenvector `beta_hat` and an
//! `(N-1)`-fold eigenvalue `gamma^2`. Inside the degenerate subspace the
//! portfolio of largest relative weight is
//! `e^1 = (u_hat - cos(theta) beta_hat) / sin(theta)`, `theta` being the angle
//! between `beta_hat` and the equal-weight unit vector `u_hat`. The other
//! `N-2` minor portfolios are orthogonal to `u_hat` and hence have zero net
//! weight.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::universe::{beta_geometry, AssetUniverse, BetaGeometry, ValidationThresholds};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CrvPortfolio {
    pub eigenvalue_tilde: f64,
    /// Unit eigenvector, asset order.
    pub vector: Vec<f64>,
    /// Relative weight `W`.
    pub weight: f64,
    pub expected_return: f64,
    pub portfolio_variance: f64,
    /// `v / |sum_i e_i r_i|`.
    pub return_adjusted_volatility: f64,
    /// Sign of `sum_i e_i r_i`, which the closed form leaves unconstrained.
    pub return_sign_negative: bool,
    pub portfolio_beta: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CrvSolution {
    pub residual_var: f64,
    pub gamma_sq: f64,
    pub scale: f64,
    pub geometry: BetaGeometry,
    /// `beta_hat`, negated when the mean beta is negative.
    pub beta_hat: Vec<f64>,
    pub major: CrvPortfolio,
    pub min_vol: CrvPortfolio,
    /// Dimension of the critically leveraged subspace, `N - 2`.
    pub degenerate_dim: usize,
    /// Mean expected return of the assets.
    pub r_av: f64,
}

impl CrvSolution {
    pub fn theta(&self) -> f64 {
        self.geometry.theta
    }

    /// Component of `v` outside `span{e^1, e^N}`, i.e. its projection on the
    /// critically leveraged subspace.
    pub fn critical_component(&self, v: &[f64]) -> Vec<f64> {
        let dot = |a: &[f64]| a.iter().zip(v).map(|(x, y)| x * y).sum::<f64>();
        let p1 = dot(&self.min_vol.vector);
        let pn = dot(&self.major.vector);
        v.iter()
            .enumerate()
            .map(|(i, x)| x - p1 * self.min_vol.vector[i] - pn * self.major.vector[i])
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CrvLimits {
    /// Large-N limit of the market-aligned volatility,
    /// `sqrt(beta.beta market_var / (N cos^2 theta))`.
    pub market_aligned_volatility: f64,
    /// `c` in `V_1 = c / sqrt(N)`, i.e. `sqrt(residual_var) / sin theta`.
    pub min_vol_decay_constant: f64,
}

pub fn solve_crv(u: &AssetUniverse, residual_var: f64) -> Result<CrvSolution> {
    solve_crv_with(
        u,
        residual_var,
        ValidationThresholds::default().uniform_beta_tan,
    )
}

pub fn solve_crv_with(
    u: &AssetUniverse,
    residual_var: f64,
    uniform_beta_tan: f64,
) -> Result<CrvSolution> {
    if residual_var.is_nan() || residual_var <= 0.0 {
        return Err(Error::NonPositiveResidualVar(residual_var));
    }
    let betas = u.betas();
    let geo = beta_geometry(&betas).ok_or(Error::AllBetasZero)?;
    if geo.tan_theta < uniform_beta_tan {
        return Err(Error::UniformBetas {
            tan_theta: geo.tan_theta,
            threshold: uniform_beta_tan,
        });
    }
    let n = betas.len();
    let nf = n as f64;
    let beta_dot: f64 = betas.iter().map(|b| b * b).sum();
    let norm = beta_dot.sqrt();
    let sign = if geo.flipped { -1.0 } else { 1.0 };
    let beta_hat: Vec<f64> = betas.iter().map(|b| sign * b / norm).collect();
    let scale = beta_dot * u.market_var;
    let returns = u.expected_returns();
    let r_av = returns.iter().sum::<f64>() / nf;
    let (cos, sin) = (geo.cos_theta, geo.sin_theta);
    let root_n = nf.sqrt();
    let u_hat = 1.0 / root_n;

    let dot = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>();

    // market-aligned
    let proj_return = dot(&beta_hat, &returns);
    let major_var = residual_var + beta_dot * u.market_var;
    let major = CrvPortfolio {
        eigenvalue_tilde: 1.0 + residual_var / scale,
        weight: root_n * cos,
        expected_return: proj_return / (root_n * cos),
        portfolio_variance: major_var / (nf * cos * cos),
        return_adjusted_volatility: major_var.sqrt() / proj_return.abs(),
        return_sign_negative: proj_return < 0.0,
        portfolio_beta: sign * norm / (root_n * cos),
        vector: beta_hat.clone(),
    };

    // minimum-volatility market-orthogonal
    let e1: Vec<f64> = beta_hat.iter().map(|b| (u_hat - cos * b) / sin).collect();
    let excess = r_av - cos * cos * major.expected_return;
    let min_vol = CrvPortfolio {
        eigenvalue_tilde: residual_var / scale,
        weight: root_n * sin,
        expected_return: excess / (sin * sin),
        portfolio_variance: residual_var / (nf * sin * sin),
        return_adjusted_volatility: residual_var.sqrt() * sin / (root_n * excess.abs()),
        return_sign_negative: excess < 0.0,
        portfolio_beta: dot(&e1, &betas) / (root_n * sin),
        vector: e1,
    };

    Ok(CrvSolution {
        residual_var,
        gamma_sq: residual_var / scale,
        scale,
        geometry: geo,
        beta_hat,
        major,
        min_vol,
        degenerate_dim: n - 2,
        r_av,
    })
}

pub fn crv_limits(u: &AssetUniverse, residual_var: f64) -> Result<CrvLimits> {
    let s = solve_crv(u, residual_var)?;
    let n = u.len() as f64;
    let beta_dot: f64 = u.assets.iter().map(|a| a.beta * a.beta).sum();
    let cos = s.geometry.cos_theta;
    Ok(CrvLimits {
        market_aligned_volatility: (beta_dot * u.market_var / (n * cos * cos)).sqrt(),
        min_vol_decay_constant: residual_var.sqrt() / s.geometry.sin_theta,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn fixture() -> AssetUniverse {
        AssetUniverse::from_columns(&[0.0; 3], &[0.04; 3], &[0.5, 1.0, 1.5], 0.05, 0.01)
    }

    #[test]
    fn hand_values() {
        let s = solve_crv(&fixture(), 0.04).unwrap();
        assert_relative_eq!(
            s.geometry.tan_theta,
            (1.0f64 / 6.0).sqrt(),
            max_relative = 1e-14
        );
        assert_relative_eq!(s.geometry.cos_theta, 0.925820, epsilon = 1e-6);
        assert_relative_eq!(s.major.weight, 1.603567, epsilon = 1e-6);
        assert_relative_eq!(s.major.portfolio_variance, 0.0291667, epsilon = 1e-7);
        assert_relative_eq!(s.min_vol.portfolio_variance, 0.0933333, epsilon = 1e-7);
        assert_relative_eq!(s.major.expected_return, 0.058333, epsilon = 1e-6);
        assert_eq!(s.degenerate_dim, 1);
    }

    #[test]
    fn min_vol_vector_is_orthogonal_unit() {
        let s = solve_crv(&fixture(), 0.04).unwrap();
        let e1 = &s.min_vol.vector;
        let d: f64 = e1.iter().zip(&s.beta_hat).map(|(a, b)| a * b).sum();
        let nn: f64 = e1.iter().map(|a| a * a).sum();
        assert!(d.abs() < 1e-12);
        assert_relative_eq!(nn, 1.0, epsilon = 1e-12);
        assert!(s.min_vol.portfolio_beta.abs() < 1e-12);
        let g = s.geometry;
        assert_relative_eq!(
            s.major.portfolio_beta,
            g.mean_beta / (g.cos_theta * g.cos_theta),
            max_relative = 1e-12
        );
    }

    #[test]
    fn negative_mean_beta_is_flipped() {
        let u = AssetUniverse::from_columns(&[0.0; 3], &[0.04; 3], &[-0.5, -1.0, -1.5], 0.05, 0.01);
        let s = solve_crv(&u, 0.04).unwrap();
        assert!(s.geometry.flipped);
        assert!(s.major.weight > 0.0);
        assert!(s.beta_hat.iter().all(|b| *b > 0.0));
        // beta of the market-aligned portfolio keeps the sign of the betas
        assert!(s.major.portfolio_beta < 0.0);
    }

    #[test]
    fn errors() {
        let u = fixture();
        assert!(matches!(
            solve_crv(&u, 0.0),
            Err(Error::NonPositiveResidualVar(_))
        ));
        let flat = AssetUniverse::from_columns(&[0.0; 3], &[0.04; 3], &[1.0; 3], 0.05, 0.01);
        assert!(matches!(
            solve_crv(&flat, 0.04),
            Err(Error::UniformBetas { .. })
        ));
        let zero = AssetUniverse::from_columns(&[0.0; 3], &[0.04; 3], &[0.0; 3], 0.05, 0.01);
        assert!(matches!(solve_crv(&zero, 0.04), Err(Error::AllBetasZero)));
    }

    #[test]
    fn replication_scaling() {
        let base = [0.5, 1.0, 1.5];
        let mut prev: Option<(f64, f64)> = None;
        for k in [1usize, 2, 4, 8] {
            let betas: Vec<f64> = base.iter().copied().cycle().take(3 * k).collect();
            let n = betas.len();
            let u = AssetUniverse::from_columns(&vec![0.01; n], &vec![0.04; n], &betas, 0.05, 0.01);
            let s = solve_crv(&u, 0.04).unwrap();
            let lim = crv_limits(&u, 0.04).unwrap();
            let v1_scaled = s.min_vol.portfolio_variance.sqrt() * (n as f64).sqrt();
            assert_relative_eq!(v1_scaled, lim.min_vol_decay_constant, max_relative = 1e-12);
            // ratio of the two portfolio variances
            let g = s.geometry;
            let bb: f64 = betas.iter().map(|b| b * b).sum();
            let ratio = s.min_vol.portfolio_variance / s.major.portfolio_variance;
            assert_relative_eq!(
                ratio,
                0.04 / (g.tan_theta * g.tan_theta * (0.04 + bb * 0.01)),
                max_relative = 1e-12
            );
            if let Some((v1, vn_lim)) = prev {
                assert_relative_eq!(v1, v1_scaled, max_relative = 1e-12);
                assert_relative_eq!(vn_lim, lim.market_aligned_volatility, max_relative = 1e-12);
            }
            prev = Some((v1_scaled, lim.market_aligned_volatility));
        }
    }
}
