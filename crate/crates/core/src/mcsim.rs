//! Monte Carlo draws from the single-index model and empirical checks of the
//! principal decomposition.
//!
//! Every path owns a ChaCha8 stream selected by `(seed, path index)`, so the
//! draws do not depend on thread scheduling. Within a period the market
//! return is drawn first, then the residuals in asset order. Gaussian
//! variates come from the Marsaglia polar method applied to 53-bit uniforms.
//! Moments are accumulated over fixed chunks of samples and combined in
//! chunk order, which makes every statistic bit-reproducible.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::par::{self, Execution};
use crate::spectral::PrincipalDecomposition;
use crate::universe::AssetUniverse;

const MOMENT_CHUNK: usize = 4096;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SimConfig {
    pub paths: usize,
    pub seed: u64,
    /// Periods per path; periods are i.i.d. and simply add samples.
    pub horizon: usize,
    #[serde(skip)]
    pub exec: Execution,
}

impl SimConfig {
    pub fn new(paths: usize, seed: u64) -> Self {
        Self {
            paths,
            seed,
            horizon: 1,
            exec: Execution::default(),
        }
    }

    pub fn samples(&self) -> usize {
        self.paths * self.horizon
    }
}

/// Simulated asset returns, one row per (path, period), row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct ReturnPaths {
    pub n_assets: usize,
    pub paths: usize,
    pub horizon: usize,
    pub data: Vec<f64>,
}

impl ReturnPaths {
    pub fn samples(&self) -> usize {
        self.paths * self.horizon
    }

    pub fn row(&self, k: usize) -> &[f64] {
        &self.data[k * self.n_assets..(k + 1) * self.n_assets]
    }
}

/// Standard normals by the polar method, caching the second variate.
struct PolarNormal {
    spare: Option<f64>,
}

impl PolarNormal {
    fn new() -> Self {
        Self { spare: None }
    }

    fn sample<R: Rng>(&mut self, rng: &mut R) -> f64 {
        if let Some(s) = self.spare.take() {
            return s;
        }
        loop {
            let u = 2.0 * rng.random::<f64>() - 1.0;
            let v = 2.0 * rng.random::<f64>() - 1.0;
            let s = u * u + v * v;
            if s > 0.0 && s < 1.0 {
                let f = (-2.0 * s.ln() / s).sqrt();
                self.spare = Some(v * f);
                return u * f;
            }
        }
    }
}

pub fn simulate(u: &AssetUniverse, cfg: &SimConfig) -> ReturnPaths {
    let n = u.len();
    let horizon = cfg.horizon.max(1);
    let market_sd = u.market_var.max(0.0).sqrt();
    let residual_sd: Vec<f64> = u
        .assets
        .iter()
        .map(|a| a.residual_var.max(0.0).sqrt())
        .collect();
    let mut data = vec![0.0; cfg.paths * horizon * n];
    if n == 0 {
        return ReturnPaths {
            n_assets: 0,
            paths: cfg.paths,
            horizon,
            data,
        };
    }
    par::for_each_chunk_mut(&mut data, horizon * n, cfg.exec, |path, block| {
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        rng.set_stream(path as u64);
        let mut normal = PolarNormal::new();
        for row in block.chunks_mut(n) {
            let market = u.market_mean + market_sd * normal.sample(&mut rng);
            for (i, (x, a)) in row.iter_mut().zip(&u.assets).enumerate() {
                let alpha = a.alpha_mean + residual_sd[i] * normal.sample(&mut rng);
                *x = alpha + a.beta * market;
            }
        }
    });
    ReturnPaths {
        n_assets: n,
        paths: cfg.paths,
        horizon,
        data,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SampleMoments {
    pub count: usize,
    pub mean: Vec<f64>,
    /// Unbiased sample covariance.
    pub covariance: DMatrix<f64>,
}

/// Mean and covariance of the rows, shifted by the first row for accuracy.
pub fn sample_moments(paths: &ReturnPaths, exec: Execution) -> SampleMoments {
    let n = paths.n_assets;
    let count = paths.samples();
    if count == 0 || n == 0 {
        return SampleMoments {
            count,
            mean: vec![0.0; n],
            covariance: DMatrix::zeros(n, n),
        };
    }
    let shift = paths.row(0).to_vec();
    let partials = par::map_chunks(&paths.data, MOMENT_CHUNK * n, exec, |chunk| {
        let mut sum = vec![0.0; n];
        let mut cross = vec![0.0; n * n];
        let mut centered = vec![0.0; n];
        for row in chunk.chunks(n) {
            for i in 0..n {
                centered[i] = row[i] - shift[i];
                sum[i] += centered[i];
            }
            for i in 0..n {
                for j in i..n {
                    cross[i * n + j] += centered[i] * centered[j];
                }
            }
        }
        (sum, cross)
    });
    let mut sum = vec![0.0; n];
    let mut cross = vec![0.0; n * n];
    for (s, c) in partials {
        sum.iter_mut().zip(&s).for_each(|(a, b)| *a += b);
        cross.iter_mut().zip(&c).for_each(|(a, b)| *a += b);
    }
    let cf = count as f64;
    let mean = shift.iter().zip(&sum).map(|(s, t)| s + t / cf).collect();
    let denom = (count.max(2) - 1) as f64;
    let covariance = DMatrix::from_fn(n, n, |i, j| {
        let (a, b) = if i <= j { (i, j) } else { (j, i) };
        (cross[a * n + b] - sum[a] * sum[b] / cf) / denom
    });
    SampleMoments {
        count,
        mean,
        covariance,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimReport {
    pub samples: usize,
    pub sample_mean: Vec<f64>,
    pub sample_cov_assets: DMatrix<f64>,
    /// `E^T C E` with `E` the eigenvector columns.
    pub sample_cov_principal: DMatrix<f64>,
    pub max_offdiag_corr: f64,
    /// `5 / sqrt(samples)`.
    pub threshold: f64,
    pub passed: bool,
    /// Model variance of each principal coordinate.
    pub model_variances: Vec<f64>,
    /// Relative error of each sample principal variance; absolute when the
    /// model variance is zero.
    pub variance_errors: Vec<f64>,
}

pub fn verify_decorrelation(
    paths: &ReturnPaths,
    decomp: &PrincipalDecomposition,
) -> Result<SimReport> {
    verify_with_basis(
        paths,
        &decomp.eigenvectors,
        &decomp.variances(),
        Execution::default(),
    )
}

/// Decorrelation check against an arbitrary orthonormal basis and the model
/// variances of its coordinates.
pub fn verify_with_basis(
    paths: &ReturnPaths,
    basis: &DMatrix<f64>,
    model_variances: &[f64],
    exec: Execution,
) -> Result<SimReport> {
    if basis.nrows() != paths.n_assets {
        return Err(Error::DimensionMismatch {
            expected: paths.n_assets,
            found: basis.nrows(),
        });
    }
    if model_variances.len() != basis.ncols() {
        return Err(Error::DimensionMismatch {
            expected: basis.ncols(),
            found: model_variances.len(),
        });
    }
    let moments = sample_moments(paths, exec);
    let principal = basis.transpose() * &moments.covariance * basis;
    let k = principal.nrows();
    let mut max_offdiag_corr = 0.0f64;
    for i in 0..k {
        for j in 0..i {
            let denom = (principal[(i, i)] * principal[(j, j)]).sqrt();
            if denom > 0.0 {
                max_offdiag_corr = max_offdiag_corr.max((principal[(i, j)] / denom).abs());
            }
        }
    }
    let variance_errors = (0..k)
        .map(|i| {
            let model = model_variances[i];
            let diff = principal[(i, i)] - model;
            if model > 0.0 {
                diff.abs() / model
            } else {
                diff.abs()
            }
        })
        .collect();
    let threshold = 5.0 / (paths.samples().max(1) as f64).sqrt();
    Ok(SimReport {
        samples: paths.samples(),
        sample_mean: moments.mean,
        sample_cov_assets: moments.covariance,
        sample_cov_principal: principal,
        max_offdiag_corr,
        threshold,
        passed: max_offdiag_corr <= threshold,
        model_variances: model_variances.to_vec(),
        variance_errors,
    })
}
