//! Principal portfolio analysis for single-index (CAPM) asset universes.
//!
//! The covariance of a single-index universe is a diagonal matrix plus a
//! rank-one market term. This crate diagonalizes it exactly through the
//! secular equation, approximately through first-order perturbation theory,
//! and in closed form when every asset carries the same residual variance.
//! The resulting principal portfolios are mutually uncorrelated, which turns
//! the riskless-augmented efficient frontier into a per-portfolio allocation
//! rule. A Monte Carlo generator checks the decorrelation empirically.
//!
//! Data-parallel loops (secular roots, eigenvector assembly, path generation,
//! frontier sweeps) run on rayon when the `parallel` feature is enabled and
//! fall back to plain iterators otherwise. Results are bit-identical either
//! way.

pub mod cli;
pub mod covariance;
pub mod crv;
pub mod error;
pub mod frontier;
pub mod io;
pub mod mcsim;
pub mod par;
pub mod report;
pub mod spectral;
pub mod universe;

pub use cli::run_cli;
pub use covariance::{build_covariance, CovariancePair};
pub use crv::{crv_limits, solve_crv, CrvLimits, CrvSolution};
pub use error::{Error, Result};
pub use frontier::{allocate, frontier_curve, FrontierAllocation};
pub use mcsim::{simulate, verify_decorrelation, ReturnPaths, SimConfig, SimReport};
pub use par::Execution;
pub use spectral::{
    market_aligned_stats, minor_average_variance, portfolio_stats, solve_exact, solve_exact_with,
    solve_perturbative, Method, PortfolioVariance, PrincipalDecomposition, PrincipalPortfolioStats,
    SolverOptions, SpectralTolerances,
};
pub use universe::{expected_returns, validate, AssetSpec, AssetUniverse, ValidationReport};
