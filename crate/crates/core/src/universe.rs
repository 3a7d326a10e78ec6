//! Asset universe of the single-index model and its standing checks.
//!
//! Each asset return is `alpha_i + beta_i * market`, with the residual
//! `alpha_i` and the market return independent Gaussians. Rates are
//! per-period decimals (0.05 means 5%).

use std::collections::HashSet;
use std::fmt;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AssetSpec {
    pub id: String,
    /// Mean of the residual return.
    pub alpha_mean: f64,
    /// Variance of the residual return.
    pub residual_var: f64,
    pub beta: f64,
}

impl AssetSpec {
    pub fn new(id: impl Into<String>, alpha_mean: f64, residual_var: f64, beta: f64) -> Self {
        Self {
            id: id.into(),
            alpha_mean,
            residual_var,
            beta,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AssetUniverse {
    pub assets: Vec<AssetSpec>,
    pub market_mean: f64,
    pub market_var: f64,
    /// Riskless rate; `None` when the universe has no riskless asset.
    pub riskless_rate: Option<f64>,
}

impl AssetUniverse {
    pub fn new(assets: Vec<AssetSpec>, market_mean: f64, market_var: f64) -> Self {
        Self {
            assets,
            market_mean,
            market_var,
            riskless_rate: None,
        }
    }

    pub fn with_riskless_rate(mut self, r0: f64) -> Self {
        self.riskless_rate = Some(r0);
        self
    }

    /// Builds a universe from parallel slices, naming assets `A0`, `A1`, ...
    pub fn from_columns(
        alpha_mean: &[f64],
        residual_var: &[f64],
        beta: &[f64],
        market_mean: f64,
        market_var: f64,
    ) -> Self {
        assert_eq!(alpha_mean.len(), beta.len());
        assert_eq!(residual_var.len(), beta.len());
        let assets = (0..beta.len())
            .map(|i| AssetSpec::new(format!("A{i}"), alpha_mean[i], residual_var[i], beta[i]))
            .collect();
        Self::new(assets, market_mean, market_var)
    }

    /// Same universe with every residual variance replaced by `residual_var`.
    pub fn with_constant_residual(&self, residual_var: f64) -> Self {
        let mut u = self.clone();
        for a in &mut u.assets {
            a.residual_var = residual_var;
        }
        u
    }

    pub fn len(&self) -> usize {
        self.assets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.assets.is_empty()
    }

    pub fn betas(&self) -> Vec<f64> {
        self.assets.iter().map(|a| a.beta).collect()
    }

    pub fn alpha_means(&self) -> Vec<f64> {
        self.assets.iter().map(|a| a.alpha_mean).collect()
    }

    pub fn residual_vars(&self) -> Vec<f64> {
        self.assets.iter().map(|a| a.residual_var).collect()
    }

    pub fn ids(&self) -> Vec<&str> {
        self.assets.iter().map(|a| a.id.as_str()).collect()
    }

    pub fn expected_returns(&self) -> Vec<f64> {
        expected_returns(self)
    }
}

/// `r_i = alpha_mean_i + beta_i * market_mean`, in asset order.
pub fn expected_returns(u: &AssetUniverse) -> Vec<f64> {
    u.assets
        .iter()
        .map(|a| a.alpha_mean + a.beta * u.market_mean)
        .collect()
}

/// Angle between the equal-weight direction and the beta direction.
///
/// `cos_theta` is taken as a dot product of unit vectors and `sin_theta` as
/// the norm of the orthogonal remainder, so neither suffers cancellation when
/// betas are nearly uniform. When the mean beta is negative the beta
/// direction is flipped (`flipped = true`) so that `cos_theta >= 0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BetaGeometry {
    pub cos_theta: f64,
    pub sin_theta: f64,
    pub tan_theta: f64,
    pub theta: f64,
    pub mean_beta: f64,
    /// Population standard deviation of the betas.
    pub beta_scatter: f64,
    pub flipped: bool,
}

impl BetaGeometry {
    /// `beta_scatter / |mean_beta|`, the same angle from sample moments.
    pub fn tan_theta_from_scatter(&self) -> f64 {
        self.beta_scatter / self.mean_beta.abs()
    }
}

/// Returns `None` when every beta is zero.
pub fn beta_geometry(betas: &[f64]) -> Option<BetaGeometry> {
    let n = betas.len();
    let norm = betas.iter().map(|b| b * b).sum::<f64>().sqrt();
    if n == 0 || norm == 0.0 {
        return None;
    }
    let u = 1.0 / (n as f64).sqrt();
    let mut cos_theta = betas.iter().map(|b| b / norm).sum::<f64>() * u;
    let flipped = cos_theta < 0.0;
    let sign = if flipped { -1.0 } else { 1.0 };
    cos_theta = cos_theta.abs();
    let sin_theta = betas
        .iter()
        .map(|b| {
            let r = u - cos_theta * sign * b / norm;
            r * r
        })
        .sum::<f64>()
        .sqrt();
    let mean_beta = betas.iter().sum::<f64>() / n as f64;
    let beta_scatter = (betas
        .iter()
        .map(|b| (b - mean_beta) * (b - mean_beta))
        .sum::<f64>()
        / n as f64)
        .sqrt();
    Some(BetaGeometry {
        cos_theta,
        sin_theta,
        tan_theta: sin_theta / cos_theta,
        theta: sin_theta.atan2(cos_theta),
        mean_beta,
        beta_scatter,
        flipped,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Violation {
    TooFewAssets { n: usize },
    DuplicateId { id: String },
    NegativeResidualVar { id: String, value: f64 },
    NonPositiveMarketVar { value: f64 },
    NonFinite { field: String },
    NoResidualVariance,
    AllBetasZero,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::TooFewAssets { n } => write!(f, "at least 2 assets required, found {n}"),
            Violation::DuplicateId { id } => write!(f, "duplicate id {id:?}"),
            Violation::NegativeResidualVar { id, value } => {
                write!(f, "residual_var of {id:?} is negative ({value})")
            }
            Violation::NonPositiveMarketVar { value } => {
                write!(f, "market_var must be positive (got {value})")
            }
            Violation::NonFinite { field } => write!(f, "{field} is not finite"),
            Violation::NoResidualVariance => {
                write!(f, "all residual variances are zero; covariance is singular")
            }
            Violation::AllBetasZero => write!(f, "all betas are zero"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Warning {
    /// Largest rescaled residual variance is not small; first-order results
    /// are inaccurate.
    PerturbativeRegime { max_gamma_sq: f64, threshold: f64 },
    /// Betas nearly uniform; the constant-residual closed form degenerates.
    NearUniformBetas { tan_theta: f64, threshold: f64 },
}

impl fmt::Display for Warning {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Warning::PerturbativeRegime {
                max_gamma_sq,
                threshold,
            } => write!(
                f,
                "max gamma^2 = {max_gamma_sq:.6} >= {threshold}; perturbative results are unreliable"
            ),
            Warning::NearUniformBetas {
                tan_theta,
                threshold,
            } => write!(
                f,
                "tan(theta) = {tan_theta:e} < {threshold:e}; betas are nearly uniform"
            ),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ValidationThresholds {
    pub gamma_sq_warn: f64,
    pub uniform_beta_tan: f64,
}

impl Default for ValidationThresholds {
    fn default() -> Self {
        Self {
            gamma_sq_warn: 0.1,
            uniform_beta_tan: 1e-6,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
    pub warnings: Vec<Warning>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }
}

pub fn validate(u: &AssetUniverse) -> ValidationReport {
    validate_with(u, &ValidationThresholds::default())
}

pub fn validate_with(u: &AssetUniverse, th: &ValidationThresholds) -> ValidationReport {
    let mut violations = Vec::new();
    let mut warnings = Vec::new();

    if u.len() < 2 {
        violations.push(Violation::TooFewAssets { n: u.len() });
    }
    let mut seen = HashSet::new();
    for a in &u.assets {
        if !seen.insert(a.id.as_str()) {
            violations.push(Violation::DuplicateId { id: a.id.clone() });
        }
    }
    for (name, v) in [("market_mean", u.market_mean), ("market_var", u.market_var)] {
        if !v.is_finite() {
            violations.push(Violation::NonFinite { field: name.into() });
        }
    }
    if let Some(r0) = u.riskless_rate {
        if !r0.is_finite() {
            violations.push(Violation::NonFinite {
                field: "riskless_rate".into(),
            });
        }
    }
    if u.market_var.is_finite() && u.market_var <= 0.0 {
        violations.push(Violation::NonPositiveMarketVar {
            value: u.market_var,
        });
    }
    for a in &u.assets {
        for (name, v) in [
            ("alpha_mean", a.alpha_mean),
            ("residual_var", a.residual_var),
            ("beta", a.beta),
        ] {
            if !v.is_finite() {
                violations.push(Violation::NonFinite {
                    field: format!("{name} of {:?}", a.id),
                });
            }
        }
        let r = a.alpha_mean + a.beta * u.market_mean;
        if a.alpha_mean.is_finite() && a.beta.is_finite() && !r.is_finite() {
            violations.push(Violation::NonFinite {
                field: format!("expected return of {:?}", a.id),
            });
        }
        if a.residual_var < 0.0 {
            violations.push(Violation::NegativeResidualVar {
                id: a.id.clone(),
                value: a.residual_var,
            });
        }
    }
    if !u.is_empty() && u.assets.iter().all(|a| a.residual_var == 0.0) {
        violations.push(Violation::NoResidualVariance);
    }

    let betas = u.betas();
    match beta_geometry(&betas) {
        None => {
            if !u.is_empty() {
                violations.push(Violation::AllBetasZero);
            }
        }
        Some(geo) => {
            let beta_sq: f64 = betas.iter().map(|b| b * b).sum();
            if u.market_var > 0.0 {
                let max_gamma_sq = u
                    .assets
                    .iter()
                    .map(|a| a.residual_var / (beta_sq * u.market_var))
                    .fold(0.0, f64::max);
                if max_gamma_sq >= th.gamma_sq_warn {
                    warnings.push(Warning::PerturbativeRegime {
                        max_gamma_sq,
                        threshold: th.gamma_sq_warn,
                    });
                }
            }
            if geo.tan_theta < th.uniform_beta_tan {
                warnings.push(Warning::NearUniformBetas {
                    tan_theta: geo.tan_theta,
                    threshold: th.uniform_beta_tan,
                });
            }
        }
    }

    ValidationReport {
        violations,
        warnings,
    }
}
