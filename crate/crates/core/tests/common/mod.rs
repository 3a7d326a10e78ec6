//! Oracles and generators shared by the integration tests. Nothing here uses
//! the library's numerics.

#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use principal_portfolios::{AssetSpec, AssetUniverse};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Dense covariance straight from the single-index definition.
pub fn dense_sigma(u: &AssetUniverse) -> DMatrix<f64> {
    let n = u.len();
    DMatrix::from_fn(n, n, |i, j| {
        let a = &u.assets[i];
        let b = &u.assets[j];
        let diag = if i == j { a.residual_var } else { 0.0 };
        diag + a.beta * b.beta * u.market_var
    })
}

/// Cyclic Jacobi eigensolver. Returns ascending eigenvalues and matching
/// eigenvector columns.
pub fn jacobi_eigen(a: &DMatrix<f64>) -> (Vec<f64>, DMatrix<f64>) {
    let n = a.nrows();
    let mut a = a.clone();
    let mut v = DMatrix::<f64>::identity(n, n);
    for _sweep in 0..100 {
        let off: f64 = (0..n)
            .flat_map(|i| (0..n).filter(move |j| *j != i).map(move |j| (i, j)))
            .map(|(i, j)| a[(i, j)] * a[(i, j)])
            .sum();
        let total: f64 = a.iter().map(|x| x * x).sum();
        if off <= 1e-34 * total {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = a[(p, q)];
                if apq == 0.0 {
                    continue;
                }
                let theta = (a[(q, q)] - a[(p, p)]) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let akp = a[(k, p)];
                    let akq = a[(k, q)];
                    a[(k, p)] = c * akp - s * akq;
                    a[(k, q)] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[(p, k)];
                    let aqk = a[(q, k)];
                    a[(p, k)] = c * apk - s * aqk;
                    a[(q, k)] = s * apk + c * aqk;
                }
                for k in 0..n {
                    let vkp = v[(k, p)];
                    let vkq = v[(k, q)];
                    v[(k, p)] = c * vkp - s * vkq;
                    v[(k, q)] = s * vkp + c * vkq;
                }
            }
        }
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|i, j| a[(*i, *i)].total_cmp(&a[(*j, *j)]));
    let values = order.iter().map(|i| a[(*i, *i)]).collect();
    let vectors = DMatrix::from_fn(n, n, |r, c| v[(r, order[c])]);
    (values, vectors)
}

pub fn projector(v: &[f64]) -> DMatrix<f64> {
    let v = DVector::from_column_slice(v);
    &v * v.transpose()
}

pub fn max_abs(m: &DMatrix<f64>) -> f64 {
    m.iter().fold(0.0f64, |acc, x| acc.max(x.abs()))
}

/// Minimum-variance weights over uncorrelated risky assets and a riskless
/// one, from the KKT system of
/// `min sum_mu X_mu^2 V_mu^2  s.t.  X_0 + sum X = 1,  X_0 R_0 + sum X R = target`.
/// Returns `(X_0, X)`.
pub fn lagrange_allocation(
    returns: &[f64],
    variances: &[f64],
    r0: f64,
    target: f64,
) -> (f64, Vec<f64>) {
    let k = returns.len();
    let m = k + 1;
    let mut kkt = DMatrix::<f64>::zeros(m + 2, m + 2);
    let mut rhs = DVector::<f64>::zeros(m + 2);
    for mu in 0..k {
        kkt[(mu + 1, mu + 1)] = 2.0 * variances[mu];
    }
    let ret = |i: usize| if i == 0 { r0 } else { returns[i - 1] };
    for i in 0..m {
        kkt[(i, m)] = 1.0;
        kkt[(m, i)] = 1.0;
        kkt[(i, m + 1)] = ret(i);
        kkt[(m + 1, i)] = ret(i);
    }
    rhs[m] = 1.0;
    rhs[m + 1] = target;
    let sol = kkt.lu().solve(&rhs).expect("KKT system is singular");
    (sol[0], (1..m).map(|i| sol[i]).collect())
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Random universe with distinct residual variances (relative gap at least
/// 1e-3) and betas bounded away from zero.
pub fn random_universe(rng: &mut ChaCha8Rng, n: usize) -> AssetUniverse {
    let market_var = rng.random_range(0.005..0.05);
    let market_mean = rng.random_range(0.02..0.1);
    let mut rvs: Vec<f64> = Vec::with_capacity(n);
    while rvs.len() < n {
        let rv: f64 = rng.random_range(0.001..0.1);
        if rvs.iter().all(|r| (r - rv).abs() > 1e-3 * r.max(rv)) {
            rvs.push(rv);
        }
    }
    let assets = rvs
        .into_iter()
        .enumerate()
        .map(|(i, rv)| {
            let mag = rng.random_range(0.1..2.0);
            let beta = if rng.random_bool(0.15) { -mag } else { mag };
            AssetSpec::new(format!("R{i}"), rng.random_range(-0.02..0.02), rv, beta)
        })
        .collect();
    AssetUniverse::new(assets, market_mean, market_var)
}

/// Universe whose rescaled residual variances are drawn from
/// `gamma_sq_lo..gamma_sq_hi`.
pub fn universe_with_gamma(
    rng: &mut ChaCha8Rng,
    n: usize,
    gamma_sq_lo: f64,
    gamma_sq_hi: f64,
) -> AssetUniverse {
    let market_var = 0.02;
    let betas: Vec<f64> = (0..n).map(|_| rng.random_range(0.3..1.8)).collect();
    let scale: f64 = betas.iter().map(|b| b * b).sum::<f64>() * market_var;
    let assets = betas
        .iter()
        .enumerate()
        .map(|(i, b)| {
            let g = rng.random_range(gamma_sq_lo..gamma_sq_hi);
            AssetSpec::new(
                format!("G{i}"),
                rng.random_range(-0.01..0.01),
                g * scale,
                *b,
            )
        })
        .collect();
    AssetUniverse::new(assets, 0.06, market_var)
}

/// `base` betas replicated to length `n` with a common residual variance.
pub fn crv_family(
    base_beta: &[f64],
    base_alpha: &[f64],
    n: usize,
    residual_var: f64,
    market_mean: f64,
    market_var: f64,
) -> AssetUniverse {
    let k = base_beta.len();
    let assets = (0..n)
        .map(|i| {
            AssetSpec::new(
                format!("F{i}"),
                base_alpha[i % k],
                residual_var,
                base_beta[i % k],
            )
        })
        .collect();
    AssetUniverse::new(assets, market_mean, market_var)
}

pub fn crv3() -> AssetUniverse {
    AssetUniverse::from_columns(
        &[0.01, 0.005, 0.0],
        &[0.04; 3],
        &[0.5, 1.0, 1.5],
        0.05,
        0.01,
    )
    .with_riskless_rate(0.02)
}

/// Least-squares slope of `ln y` against `ln x`.
pub fn log_log_slope(x: &[f64], y: &[f64]) -> f64 {
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    let n = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxy: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = lx.iter().map(|a| (a - mx) * (a - mx)).sum();
    sxy / sxx
}
