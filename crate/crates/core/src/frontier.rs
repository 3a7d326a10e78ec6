//! Efficient frontier over the riskless asset and the principal portfolios.
//!
//! Principal portfolios are uncorrelated, so the tangency portfolio holds
//! each of them in proportion to its score `Z = (R - R0) / V^2`, i.e. in
//! inverse proportion to its variance and in proportion to its excess
//! return. A target return `R*` is reached by scaling the risky holdings by
//! `t = (R* - R0) / sum_mu Z_mu (R_mu - R0)` and putting the remainder in the
//! riskless asset. Critically leveraged portfolios (infinite variance, no
//! defined return) score zero and are never held.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::par::{self, Execution};
use crate::spectral::{PrincipalDecomposition, PrincipalPortfolioStats};
use crate::universe::AssetUniverse;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrontierAllocation {
    pub target_return: f64,
    /// Riskless weight.
    pub x0: f64,
    /// Weight of each principal portfolio, same order as the input stats.
    pub x: Vec<f64>,
    pub v_eff: f64,
    /// Allocation scores.
    pub z: Vec<f64>,
}

impl FrontierAllocation {
    pub fn realized_return(&self, stats: &[PrincipalPortfolioStats], r0: f64) -> f64 {
        self.x0 * r0
            + self
                .x
                .iter()
                .zip(stats)
                .filter(|(x, _)| **x != 0.0)
                .map(|(x, s)| x * s.expected_return.unwrap_or(0.0))
                .sum::<f64>()
    }
}

pub fn allocate(
    stats: &[PrincipalPortfolioStats],
    r0: f64,
    target: f64,
) -> Result<FrontierAllocation> {
    let mut z = vec![0.0; stats.len()];
    let mut excess = vec![0.0; stats.len()];
    let mut variances = vec![0.0; stats.len()];
    for (mu, s) in stats.iter().enumerate() {
        let (Some(var), Some(ret)) = (s.portfolio_variance.finite(), s.expected_return) else {
            continue;
        };
        if s.critically_leveraged || ret == r0 {
            continue;
        }
        if var.is_nan() || var <= 0.0 {
            return Err(Error::Degenerate(format!(
                "principal portfolio {} has zero variance and excess return {}",
                s.index,
                ret - r0
            )));
        }
        excess[mu] = ret - r0;
        variances[mu] = var;
        z[mu] = excess[mu] / var;
    }
    if z.iter().all(|v| *v == 0.0) {
        return Err(Error::Unreachable);
    }
    let denom: f64 = z.iter().zip(&excess).map(|(z, e)| z * e).sum();
    if !(denom.is_finite() && denom > 0.0) {
        return Err(Error::Degenerate(format!(
            "tangency normalization is {denom}"
        )));
    }
    let t = (target - r0) / denom;
    let x: Vec<f64> = z.iter().map(|z| t * z).collect();
    let x0 = 1.0 - x.iter().sum::<f64>();
    let v_eff = x
        .iter()
        .zip(&variances)
        .map(|(x, v)| x * x * v)
        .sum::<f64>()
        .sqrt();
    Ok(FrontierAllocation {
        target_return: target,
        x0,
        x,
        v_eff,
        z,
    })
}

/// One allocation per target; failures are kept per target.
pub fn frontier_curve(
    stats: &[PrincipalPortfolioStats],
    r0: f64,
    targets: &[f64],
    exec: Execution,
) -> Vec<Result<FrontierAllocation>> {
    par::map_indexed(targets.len(), exec, |i| allocate(stats, r0, targets[i]))
}

/// Allocation against the universe's riskless rate.
pub fn allocate_for(
    u: &AssetUniverse,
    decomp: &PrincipalDecomposition,
    target: f64,
) -> Result<FrontierAllocation> {
    let r0 = u.riskless_rate.ok_or(Error::NoRisklessAsset)?;
    allocate(&decomp.portfolios, r0, target)
}

/// `steps` evenly spaced targets from `lo` to `hi` inclusive.
pub fn sweep_targets(lo: f64, hi: f64, steps: usize) -> Vec<f64> {
    match steps {
        0 => Vec::new(),
        1 => vec![lo],
        _ => (0..steps)
            .map(|i| {
                let t = i as f64 / (steps - 1) as f64;
                lo * (1.0 - t) + hi * t
            })
            .collect(),
    }
}
