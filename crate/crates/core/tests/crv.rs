mod common;

use common::*;
use principal_portfolios::crv::{crv_limits, solve_crv};
use principal_portfolios::{build_covariance, solve_exact, AssetUniverse, Error};
use rand::Rng;

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn random_crv(seed: u64, n: usize) -> (AssetUniverse, f64) {
    let mut r = rng(seed);
    let rv = r.random_range(0.005..0.08);
    let betas: Vec<f64> = (0..n).map(|_| r.random_range(0.2..2.0)).collect();
    let alphas: Vec<f64> = (0..n).map(|_| r.random_range(-0.01..0.01)).collect();
    let u = AssetUniverse::from_columns(&alphas, &vec![rv; n], &betas, 0.06, 0.02);
    (u, rv)
}

#[test]
fn matches_general_solver() {
    for (seed, n) in [(1, 3), (2, 5), (3, 12), (4, 40)] {
        let (u, rv) = random_crv(seed, n);
        let s = solve_crv(&u, rv).unwrap();
        let cp = build_covariance(&u).unwrap();
        let d = solve_exact(&cp).unwrap();
        for lam in &d.eigenvalues_tilde[..n - 1] {
            assert!((lam - s.gamma_sq).abs() <= 1e-10 * s.gamma_sq);
        }
        let top = d.eigenvalues_tilde[n - 1];
        assert!((top - s.major.eigenvalue_tilde).abs() <= 1e-10 * top);
        // distinguished vectors after canonicalization
        let en = d.eigenvector(n - 1);
        let e1 = d.eigenvector(0);
        for i in 0..n {
            assert!((en[i] - s.major.vector[i]).abs() < 1e-12);
            assert!((e1[i] - s.min_vol.vector[i]).abs() < 1e-12);
        }
        assert!((d.portfolios[0].weight - s.min_vol.weight).abs() < 1e-12);
        // the rest of the block is critically leveraged
        for p in &d.portfolios[1..n - 1] {
            assert!(p.weight.abs() <= 1e-10);
            assert!(p.critically_leveraged);
            assert!(p.portfolio_variance.is_infinite());
        }
    }
}

#[test]
fn min_vol_portfolio_has_largest_weight_in_minor_space() {
    let (u, rv) = random_crv(9, 7);
    let s = solve_crv(&u, rv).unwrap();
    let mut r = rng(10);
    let n = u.len();
    let w1: f64 = s.min_vol.vector.iter().sum();
    for _ in 0..200 {
        let mut w: Vec<f64> = (0..n).map(|_| r.random_range(-1.0..1.0)).collect();
        let p = dot(&w, &s.beta_hat);
        for (wi, b) in w.iter_mut().zip(&s.beta_hat) {
            *wi -= p * b;
        }
        let norm = dot(&w, &w).sqrt();
        w.iter_mut().for_each(|x| *x /= norm);
        assert!(w1 >= w.iter().sum::<f64>() - 1e-12);
    }
}

#[test]
fn vectors_outside_distinguished_plane_have_zero_weight() {
    let (u, rv) = random_crv(21, 9);
    let s = solve_crv(&u, rv).unwrap();
    let mut r = rng(22);
    for _ in 0..50 {
        let v: Vec<f64> = (0..9).map(|_| r.random_range(-1.0..1.0)).collect();
        let c = s.critical_component(&v);
        assert!(c.iter().sum::<f64>().abs() < 1e-12);
        assert!(dot(&c, &s.beta_hat).abs() < 1e-12);
    }
}

#[test]
fn two_angle_definitions_agree() {
    for seed in 30..40 {
        let (u, rv) = random_crv(seed, 6);
        let g = solve_crv(&u, rv).unwrap().geometry;
        assert!((g.tan_theta - g.tan_theta_from_scatter()).abs() <= 1e-12 * g.tan_theta.max(1.0));
        assert!((g.cos_theta.powi(2) + g.sin_theta.powi(2) - 1.0).abs() < 1e-14);
    }
}

#[test]
fn portfolio_betas() {
    let u = crv3();
    let s = solve_crv(&u, 0.04).unwrap();
    let g = s.geometry;
    assert!(s.min_vol.portfolio_beta.abs() < 1e-10);
    assert!((s.major.portfolio_beta - g.mean_beta / (g.cos_theta * g.cos_theta)).abs() < 1e-10);
}

#[test]
fn zero_alpha_market_aligned_return() {
    let u = AssetUniverse::from_columns(&[0.0; 3], &[0.04; 3], &[0.5, 1.0, 1.5], 0.05, 0.01);
    let s = solve_crv(&u, 0.04).unwrap();
    let want = 3.5f64.sqrt() * 0.05 / (3f64.sqrt() * s.geometry.cos_theta);
    assert!((s.major.expected_return - want).abs() < 1e-15);
    assert!((s.major.expected_return - 0.058333).abs() < 1e-6);
}

#[test]
fn limits_under_replication() {
    let base = [0.5, 1.0, 1.5];
    let lim = |k: usize| {
        let n = 3 * k;
        let betas: Vec<f64> = base.iter().copied().cycle().take(n).collect();
        let u = AssetUniverse::from_columns(&vec![0.0; n], &vec![0.04; n], &betas, 0.05, 0.01);
        let s = solve_crv(&u, 0.04).unwrap();
        (s, crv_limits(&u, 0.04).unwrap(), n as f64)
    };
    let (s1, l1, _) = lim(1);
    let (s2, l2, n2) = lim(1000);
    assert!((l1.min_vol_decay_constant - l2.min_vol_decay_constant).abs() < 1e-12);
    assert!(
        (s2.min_vol.portfolio_variance.sqrt() * n2.sqrt() - l2.min_vol_decay_constant).abs()
            < 1e-12
    );
    // the market-aligned volatility approaches its nonzero limit
    let gap1 = (s1.major.portfolio_variance.sqrt() - l1.market_aligned_volatility).abs();
    let gap2 = (s2.major.portfolio_variance.sqrt() - l2.market_aligned_volatility).abs();
    assert!(gap2 < gap1 / 500.0);
    assert!(l2.market_aligned_volatility > 0.1);
}

#[test]
fn uniform_betas_refused() {
    let u = AssetUniverse::from_columns(&[0.0; 4], &[0.01; 4], &[1.2; 4], 0.05, 0.01);
    assert!(matches!(
        solve_crv(&u, 0.01),
        Err(Error::UniformBetas { .. })
    ));
}
