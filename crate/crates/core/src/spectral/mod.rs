//! Principal decomposition of the rescaled single-index covariance.
//!
//! [`solve_exact`] returns all `N` eigenpairs through the secular equation.
//! [`solve_perturbative`] returns the first-order market-aligned pair and a
//! summary of the minor spectrum. Either way eigenpairs are turned into
//! [`PrincipalPortfolioStats`] in rate units.
//!
//! Conventions: eigenvalues ascend, so `mu = N` is the market-aligned
//! portfolio. Each eigenvector is oriented so its relative weight
//! `W = sum_i e_i` is non-negative; when `W` vanishes the first nonzero
//! component is made positive. Inside a degenerate block the first vector is
//! the normalized projection of the equal-weight direction onto the block
//! (the block's maximum-weight portfolio) and the remaining vectors have zero
//! weight.

mod perturbative;
pub mod secular;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::covariance::CovariancePair;
use crate::error::{Error, Result};
use crate::par::{self, Execution};

pub use perturbative::{market_aligned_stats, solve_perturbative, MarketAlignedStats};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpectralTolerances {
    /// Relative step / residual at which a secular root is accepted.
    pub secular: f64,
    /// Couplings `|beta_hat_i|` below this are deflated.
    pub coupling: f64,
    /// Relative pole separation below which poles are treated as equal.
    pub repeated_pole: f64,
    /// `|W|` at or below this marks a critically leveraged portfolio.
    pub critical_weight: f64,
    pub max_iterations: usize,
}

impl Default for SpectralTolerances {
    fn default() -> Self {
        Self {
            secular: 1e-14,
            coupling: 1e-14,
            repeated_pole: 1e-12,
            critical_weight: 1e-10,
            max_iterations: 200,
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct SolverOptions {
    pub tol: SpectralTolerances,
    pub exec: Execution,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Exact,
    Perturbative,
}

impl Method {
    pub fn as_str(self) -> &'static str {
        match self {
            Method::Exact => "exact",
            Method::Perturbative => "perturbative",
        }
    }
}

/// Portfolio variance `v^2 / W^2`; infinite for critically leveraged
/// portfolios.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PortfolioVariance {
    Finite(f64),
    Infinite,
}

impl PortfolioVariance {
    pub fn finite(self) -> Option<f64> {
        match self {
            PortfolioVariance::Finite(v) => Some(v),
            PortfolioVariance::Infinite => None,
        }
    }

    pub fn is_infinite(self) -> bool {
        matches!(self, PortfolioVariance::Infinite)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PrincipalPortfolioStats {
    /// 1-based principal index `mu`.
    pub index: usize,
    /// Relative weight `W = sum_i e_i`.
    pub weight: f64,
    pub variance_tilde: f64,
    /// `v^2 = scale * variance_tilde`.
    pub variance: f64,
    pub portfolio_variance: PortfolioVariance,
    /// `R = sum_i e_i r_i / W`; absent when `W = 0`.
    pub expected_return: Option<f64>,
    /// `sum_i e_i r_i`.
    pub weighted_return: f64,
    /// `v / |sum_i e_i r_i|`; absent when the weighted return is zero.
    pub return_adjusted_volatility: Option<f64>,
    /// Weight-averaged beta `sum_i e_i beta_i / W`; absent when `W = 0`.
    pub portfolio_beta: Option<f64>,
    pub critically_leveraged: bool,
    pub is_market_aligned: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MinorSummary {
    /// `(tr(sigma) - v_N^2) / (N - 1)` using the decomposition's `v_N^2`.
    pub average_variance: f64,
    /// `sum_i (1 - beta_hat_i^2) residual_var_i / (N - 1)`.
    pub approximation: f64,
}

#[derive(Debug, Clone)]
pub struct PrincipalDecomposition {
    pub method: Method,
    /// Ascending. Length `N` for exact solves, 1 for perturbative ones.
    pub eigenvalues_tilde: Vec<f64>,
    /// Unit eigenvectors as columns, asset order.
    pub eigenvectors: DMatrix<f64>,
    pub portfolios: Vec<PrincipalPortfolioStats>,
    /// Max over columns of `|| sigma_tilde e - lambda e ||`.
    pub residual: f64,
    pub scale: f64,
    pub minor_summary: Option<MinorSummary>,
}

impl PrincipalDecomposition {
    /// Eigenvalues in rate units.
    pub fn variances(&self) -> Vec<f64> {
        self.eigenvalues_tilde
            .iter()
            .map(|v| v * self.scale)
            .collect()
    }

    pub fn market_aligned(&self) -> &PrincipalPortfolioStats {
        self.portfolios
            .last()
            .expect("decomposition has no portfolios")
    }

    pub fn eigenvector(&self, col: usize) -> Vec<f64> {
        self.eigenvectors.column(col).iter().copied().collect()
    }
}

pub fn solve_exact(cp: &CovariancePair) -> Result<PrincipalDecomposition> {
    solve_exact_with(cp, &SolverOptions::default())
}

pub fn solve_exact_with(
    cp: &CovariancePair,
    opts: &SolverOptions,
) -> Result<PrincipalDecomposition> {
    let n = cp.len();
    let sys = secular::diag_plus_rank_one(
        cp.gamma_sq.as_slice(),
        cp.beta_hat.as_slice(),
        &opts.tol,
        opts.exec,
    )?;
    let mut vectors = sys.vectors;
    canonicalize_blocks(&mut vectors, &sys.blocks);
    orient_columns(&mut vectors, opts.tol.critical_weight, opts.exec);

    let residual = max_residual(cp, &vectors, &sys.values, opts.exec);
    let mut decomp = PrincipalDecomposition {
        method: Method::Exact,
        eigenvalues_tilde: sys.values,
        eigenvectors: vectors,
        portfolios: Vec::new(),
        residual,
        scale: cp.scale,
        minor_summary: None,
    };
    decomp.portfolios = portfolio_stats_with(cp, &decomp, &cp.expected_returns, opts);
    if n > 1 {
        let v_major = decomp.variances()[n - 1];
        decomp.minor_summary = Some(MinorSummary {
            average_variance: (cp.trace() - v_major) / (n - 1) as f64,
            approximation: minor_approximation(cp),
        });
    }
    Ok(decomp)
}

/// First-order estimate of the mean minor variance.
pub(crate) fn minor_approximation(cp: &CovariancePair) -> f64 {
    let n = cp.len();
    cp.beta_hat
        .iter()
        .zip(&cp.residual_vars)
        .map(|(b, v)| (1.0 - b * b) * v)
        .sum::<f64>()
        / (n - 1) as f64
}

/// Puts the maximum-weight direction first in every degenerate block.
fn canonicalize_blocks(vectors: &mut DMatrix<f64>, blocks: &[Option<usize>]) {
    let n = vectors.nrows();
    let mut ids: Vec<usize> = blocks.iter().flatten().copied().collect();
    ids.sort_unstable();
    ids.dedup();
    for id in ids {
        let cols: Vec<usize> = (0..blocks.len())
            .filter(|&c| blocks[c] == Some(id))
            .collect();
        // a = Q^T u with u the unscaled equal-weight vector.
        let a: Vec<f64> = cols.iter().map(|&c| vectors.column(c).sum()).collect();
        let na = a.iter().map(|x| x * x).sum::<f64>().sqrt();
        if na == 0.0 {
            continue;
        }
        // Householder reflector H with H a = -sign(a_0) |a| e_0.
        let mut w = a.clone();
        w[0] += na.copysign(a[0]);
        let ww: f64 = w.iter().map(|x| x * x).sum();
        // Q <- Q H = Q - 2 (Q w) w^T / (w^T w)
        let mut qw = vec![0.0; n];
        for (k, &c) in cols.iter().enumerate() {
            for (acc, q) in qw.iter_mut().zip(vectors.column(c).iter()) {
                *acc += q * w[k];
            }
        }
        for (k, &c) in cols.iter().enumerate() {
            let f = 2.0 * w[k] / ww;
            for (q, acc) in vectors.column_mut(c).iter_mut().zip(&qw) {
                *q -= f * acc;
            }
        }
    }
}

fn orient_columns(vectors: &mut DMatrix<f64>, critical: f64, exec: Execution) {
    let n = vectors.nrows();
    if n == 0 {
        return;
    }
    par::for_each_chunk_mut(vectors.as_mut_slice(), n, exec, |_, col| {
        let w: f64 = col.iter().sum();
        let flip = if w.abs() <= critical {
            let peak = col.iter().fold(0.0f64, |m, x| m.max(x.abs()));
            col.iter()
                .find(|x| x.abs() > 1e-12 * peak)
                .is_some_and(|x| *x < 0.0)
        } else {
            w < 0.0
        };
        if flip {
            col.iter_mut().for_each(|x| *x = -*x);
        }
    });
}

fn max_residual(
    cp: &CovariancePair,
    vectors: &DMatrix<f64>,
    values: &[f64],
    exec: Execution,
) -> f64 {
    let n = vectors.nrows();
    par::map_indexed(values.len(), exec, |j| {
        let v = vectors.column(j);
        let sv = cp.apply_tilde(v.as_slice());
        (0..n)
            .map(|i| (sv[i] - values[j] * v[i]).powi(2))
            .sum::<f64>()
            .sqrt()
    })
    .into_iter()
    .fold(0.0, f64::max)
}

/// Per-portfolio statistics for every eigenvector column of `decomp`.
pub fn portfolio_stats(
    cp: &CovariancePair,
    decomp: &PrincipalDecomposition,
    returns: &[f64],
) -> Vec<PrincipalPortfolioStats> {
    portfolio_stats_with(cp, decomp, returns, &SolverOptions::default())
}

pub(crate) fn portfolio_stats_with(
    cp: &CovariancePair,
    decomp: &PrincipalDecomposition,
    returns: &[f64],
    opts: &SolverOptions,
) -> Vec<PrincipalPortfolioStats> {
    let n = cp.len();
    let cols = decomp.eigenvalues_tilde.len();
    let first_index = n - cols + 1;
    par::map_indexed(cols, opts.exec, |j| {
        let e = decomp.eigenvectors.column(j);
        let mu = first_index + j;
        let variance_tilde = decomp.eigenvalues_tilde[j];
        stats_for_vector(
            e.as_slice(),
            variance_tilde,
            cp,
            returns,
            mu,
            mu == n,
            opts.tol.critical_weight,
        )
    })
}

pub(crate) fn stats_for_vector(
    e: &[f64],
    variance_tilde: f64,
    cp: &CovariancePair,
    returns: &[f64],
    index: usize,
    is_market_aligned: bool,
    critical: f64,
) -> PrincipalPortfolioStats {
    let weight: f64 = e.iter().sum();
    let variance = cp.scale * variance_tilde;
    let weighted_return: f64 = e.iter().zip(returns).map(|(a, r)| a * r).sum();
    let weighted_beta: f64 = e.iter().zip(&cp.betas).map(|(a, b)| a * b).sum();
    let critically_leveraged = weight.abs() <= critical;
    let (portfolio_variance, expected_return, portfolio_beta) = if critically_leveraged {
        (PortfolioVariance::Infinite, None, None)
    } else {
        (
            PortfolioVariance::Finite(variance / (weight * weight)),
            Some(weighted_return / weight),
            Some(weighted_beta / weight),
        )
    };
    let return_adjusted_volatility =
        (weighted_return != 0.0).then(|| variance.max(0.0).sqrt() / weighted_return.abs());
    PrincipalPortfolioStats {
        index,
        weight,
        variance_tilde,
        variance,
        portfolio_variance,
        expected_return,
        weighted_return,
        return_adjusted_volatility,
        portfolio_beta,
        critically_leveraged,
        is_market_aligned,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MinorAverage {
    /// `(N - 1)^-1 sum_{mu < N} v_mu^2` from the exact spectrum.
    pub exact: f64,
    /// `(N - 1)^-1 sum_i (1 - beta_hat_i^2) residual_var_i`.
    pub approximation: f64,
}

pub fn minor_average_variance(
    cp: &CovariancePair,
    decomp: &PrincipalDecomposition,
) -> Result<MinorAverage> {
    if decomp.method != Method::Exact {
        return Err(Error::WrongMethod { expected: "exact" });
    }
    let n = cp.len();
    if n < 2 {
        return Err(Error::InvalidArgument("need at least two assets".into()));
    }
    let exact = decomp.variances()[..n - 1].iter().sum::<f64>() / (n - 1) as f64;
    Ok(MinorAverage {
        exact,
        approximation: minor_approximation(cp),
    })
}

pub(crate) fn normalize(v: &mut DVector<f64>) {
    let nv = v.norm();
    if nv > 0.0 {
        *v /= nv;
    }
}
