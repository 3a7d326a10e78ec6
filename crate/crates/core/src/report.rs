//! JSON analysis report written by the `pp` binary.
//!
//! Every section is optional except the universe digest, the validation
//! outcome and the provenance block. Portfolio compositions are keyed by
//! asset id in input order. Infinite portfolio variances are written as the
//! string `"infinite"`.

use indexmap::IndexMap;
use serde::de::{self, Deserializer, Visitor};
use serde::ser::Serializer;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::covariance::CovariancePair;
use crate::crv::{CrvLimits, CrvPortfolio, CrvSolution};
use crate::frontier::{self, FrontierAllocation};
use crate::mcsim::{SimConfig, SimReport};
use crate::par::Execution;
use crate::spectral::{
    market_aligned_stats, Method, MinorSummary, PortfolioVariance, PrincipalDecomposition,
    SpectralTolerances,
};
use crate::universe::{AssetUniverse, ValidationReport, ValidationThresholds};

const INFINITE: &str = "infinite";

impl Serialize for PortfolioVariance {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match self {
            PortfolioVariance::Finite(v) => s.serialize_f64(*v),
            PortfolioVariance::Infinite => s.serialize_str(INFINITE),
        }
    }
}

impl<'de> Deserialize<'de> for PortfolioVariance {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        struct V;
        impl Visitor<'_> for V {
            type Value = PortfolioVariance;

            fn expecting(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
                write!(f, "a number or \"{INFINITE}\"")
            }

            fn visit_f64<E: de::Error>(self, v: f64) -> Result<Self::Value, E> {
                Ok(PortfolioVariance::Finite(v))
            }

            fn visit_i64<E: de::Error>(self, v: i64) -> Result<Self::Value, E> {
                Ok(PortfolioVariance::Finite(v as f64))
            }

            fn visit_u64<E: de::Error>(self, v: u64) -> Result<Self::Value, E> {
                Ok(PortfolioVariance::Finite(v as f64))
            }

            fn visit_str<E: de::Error>(self, v: &str) -> Result<Self::Value, E> {
                if v == INFINITE {
                    Ok(PortfolioVariance::Infinite)
                } else {
                    Err(E::invalid_value(de::Unexpected::Str(v), &self))
                }
            }
        }
        d.deserialize_any(V)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnalysisReport {
    pub universe_digest: UniverseDigest,
    pub validation: ValidationReport,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub decomposition: Option<DecompositionSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub crv: Option<CrvSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub frontier: Option<FrontierSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub simulation: Option<SimulationSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub compare: Option<CompareSection>,
    pub provenance: Provenance,
}

impl AnalysisReport {
    pub fn new(u: &AssetUniverse, validation: ValidationReport, provenance: Provenance) -> Self {
        Self {
            universe_digest: UniverseDigest::of(u),
            validation,
            decomposition: None,
            crv: None,
            frontier: None,
            simulation: None,
            compare: None,
            provenance,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UniverseDigest {
    pub n_assets: usize,
    /// SHA-256 over the exact bit patterns of the inputs.
    pub sha256: String,
    pub market_mean: f64,
    pub market_var: f64,
    pub riskless_rate: Option<f64>,
}

impl UniverseDigest {
    pub fn of(u: &AssetUniverse) -> Self {
        let mut h = Sha256::new();
        for a in &u.assets {
            h.update((a.id.len() as u64).to_le_bytes());
            h.update(a.id.as_bytes());
            for v in [a.alpha_mean, a.residual_var, a.beta] {
                h.update(v.to_bits().to_le_bytes());
            }
        }
        h.update(u.market_mean.to_bits().to_le_bytes());
        h.update(u.market_var.to_bits().to_le_bytes());
        match u.riskless_rate {
            Some(r) => {
                h.update([1u8]);
                h.update(r.to_bits().to_le_bytes());
            }
            None => h.update([0u8]),
        }
        Self {
            n_assets: u.len(),
            sha256: hex::encode(h.finalize()),
            market_mean: u.market_mean,
            market_var: u.market_var,
            riskless_rate: u.riskless_rate,
        }
    }
}

fn keyed(u: &AssetUniverse, values: impl IntoIterator<Item = f64>) -> IndexMap<String, f64> {
    u.assets.iter().map(|a| a.id.clone()).zip(values).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PortfolioEntry {
    pub index: usize,
    pub eigenvalue_tilde: f64,
    pub variance: f64,
    pub weight: f64,
    pub portfolio_variance: PortfolioVariance,
    pub expected_return: Option<f64>,
    pub weighted_return: f64,
    pub return_adjusted_volatility: Option<f64>,
    pub portfolio_beta: Option<f64>,
    pub critically_leveraged: bool,
    pub market_aligned: bool,
    pub eigenvector: IndexMap<String, f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FirstOrderSection {
    pub portfolio_variance: f64,
    pub leading_order_variance: f64,
    pub return_adjusted_volatility: f64,
    pub composition: IndexMap<String, f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecompositionSection {
    pub method: Method,
    pub scale: f64,
    /// Ascending, rate units.
    pub eigenvalues: Vec<f64>,
    pub eigenvalues_tilde: Vec<f64>,
    pub residual: f64,
    pub trace: f64,
    pub portfolios: Vec<PortfolioEntry>,
    pub minor_summary: Option<MinorSummary>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub first_order: Option<FirstOrderSection>,
}

impl DecompositionSection {
    pub fn build(u: &AssetUniverse, cp: &CovariancePair, d: &PrincipalDecomposition) -> Self {
        let portfolios = d
            .portfolios
            .iter()
            .enumerate()
            .map(|(col, s)| PortfolioEntry {
                index: s.index,
                eigenvalue_tilde: s.variance_tilde,
                variance: s.variance,
                weight: s.weight,
                portfolio_variance: s.portfolio_variance,
                expected_return: s.expected_return,
                weighted_return: s.weighted_return,
                return_adjusted_volatility: s.return_adjusted_volatility,
                portfolio_beta: s.portfolio_beta,
                critically_leveraged: s.critically_leveraged,
                market_aligned: s.is_market_aligned,
                eigenvector: keyed(u, d.eigenvectors.column(col).iter().copied()),
            })
            .collect();
        let first_order = market_aligned_stats(cp, d).ok().map(|m| FirstOrderSection {
            portfolio_variance: m.portfolio_variance,
            leading_order_variance: m.leading_order_variance,
            return_adjusted_volatility: m.return_adjusted_volatility,
            composition: keyed(u, m.composition),
        });
        Self {
            method: d.method,
            scale: d.scale,
            eigenvalues: d.variances(),
            eigenvalues_tilde: d.eigenvalues_tilde.clone(),
            residual: d.residual,
            trace: cp.trace(),
            portfolios,
            minor_summary: d.minor_summary,
            first_order,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CrvEntry {
    pub eigenvalue_tilde: f64,
    pub weight: f64,
    pub expected_return: f64,
    pub portfolio_variance: f64,
    pub return_adjusted_volatility: f64,
    pub return_sign_negative: bool,
    pub portfolio_beta: f64,
    pub eigenvector: IndexMap<String, f64>,
}

impl CrvEntry {
    fn build(u: &AssetUniverse, p: &CrvPortfolio) -> Self {
        Self {
            eigenvalue_tilde: p.eigenvalue_tilde,
            weight: p.weight,
            expected_return: p.expected_return,
            portfolio_variance: p.portfolio_variance,
            return_adjusted_volatility: p.return_adjusted_volatility,
            return_sign_negative: p.return_sign_negative,
            portfolio_beta: p.portfolio_beta,
            eigenvector: keyed(u, p.vector.iter().copied()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CrvSection {
    pub residual_var: f64,
    pub gamma_sq: f64,
    pub scale: f64,
    pub theta: f64,
    pub cos_theta: f64,
    pub sin_theta: f64,
    pub tan_theta: f64,
    pub tan_theta_from_scatter: f64,
    pub mean_beta: f64,
    pub beta_flipped: bool,
    pub mean_expected_return: f64,
    pub critical_subspace_dim: usize,
    pub market_aligned: CrvEntry,
    pub min_vol: CrvEntry,
    pub limits: CrvLimits,
}

impl CrvSection {
    pub fn build(u: &AssetUniverse, s: &CrvSolution, limits: CrvLimits) -> Self {
        let g = s.geometry;
        Self {
            residual_var: s.residual_var,
            gamma_sq: s.gamma_sq,
            scale: s.scale,
            theta: g.theta,
            cos_theta: g.cos_theta,
            sin_theta: g.sin_theta,
            tan_theta: g.tan_theta,
            tan_theta_from_scatter: g.tan_theta_from_scatter(),
            mean_beta: g.mean_beta,
            beta_flipped: g.flipped,
            mean_expected_return: s.r_av,
            critical_subspace_dim: s.degenerate_dim,
            market_aligned: CrvEntry::build(u, &s.major),
            min_vol: CrvEntry::build(u, &s.min_vol),
            limits,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrontierPoint {
    pub target_return: f64,
    pub v_eff: Option<f64>,
    pub riskless_weight: Option<f64>,
    /// Weight of each principal portfolio, in `portfolio_index` order.
    pub weights: Option<Vec<f64>>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrontierSection {
    pub riskless_rate: f64,
    pub portfolio_index: Vec<usize>,
    /// Allocation scores, shared by every target.
    pub scores: Option<Vec<f64>>,
    pub points: Vec<FrontierPoint>,
}

impl FrontierSection {
    pub fn build(d: &PrincipalDecomposition, r0: f64, targets: &[f64], exec: Execution) -> Self {
        let curve = frontier::frontier_curve(&d.portfolios, r0, targets, exec);
        let scores = curve
            .iter()
            .find_map(|r| r.as_ref().ok())
            .map(|a: &FrontierAllocation| a.z.clone());
        let points = targets
            .iter()
            .zip(curve)
            .map(|(t, r)| match r {
                Ok(a) => FrontierPoint {
                    target_return: *t,
                    v_eff: Some(a.v_eff),
                    riskless_weight: Some(a.x0),
                    weights: Some(a.x),
                    error: None,
                },
                Err(e) => FrontierPoint {
                    target_return: *t,
                    v_eff: None,
                    riskless_weight: None,
                    weights: None,
                    error: Some(e.to_string()),
                },
            })
            .collect();
        Self {
            riskless_rate: r0,
            portfolio_index: d.portfolios.iter().map(|s| s.index).collect(),
            scores,
            points,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationSection {
    pub paths: usize,
    pub horizon: usize,
    pub seed: u64,
    pub samples: usize,
    pub max_offdiag_corr: f64,
    pub threshold: f64,
    pub passed: bool,
    pub model_variances: Vec<f64>,
    pub sample_variances: Vec<f64>,
    pub variance_errors: Vec<f64>,
    pub sample_mean: IndexMap<String, f64>,
    /// Row-major asset covariance.
    pub sample_covariance: Vec<Vec<f64>>,
}

impl SimulationSection {
    pub fn build(u: &AssetUniverse, cfg: &SimConfig, r: &SimReport) -> Self {
        let n = r.sample_cov_assets.nrows();
        Self {
            paths: cfg.paths,
            horizon: cfg.horizon,
            seed: cfg.seed,
            samples: r.samples,
            max_offdiag_corr: r.max_offdiag_corr,
            threshold: r.threshold,
            passed: r.passed,
            model_variances: r.model_variances.clone(),
            sample_variances: r.sample_cov_principal.diagonal().iter().copied().collect(),
            variance_errors: r.variance_errors.clone(),
            sample_mean: keyed(u, r.sample_mean.iter().copied()),
            sample_covariance: (0..n)
                .map(|i| r.sample_cov_assets.row(i).iter().copied().collect())
                .collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompareRow {
    pub quantity: String,
    pub exact: f64,
    pub perturbative: Option<f64>,
    pub constant_residual: Option<f64>,
    /// `|perturbative - exact| / |exact|`.
    pub perturbative_discrepancy: Option<f64>,
    pub constant_residual_discrepancy: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompareSection {
    /// Residual variance used for the constant-residual column.
    pub constant_residual_var: f64,
    pub constant_residual_error: Option<String>,
    pub rows: Vec<CompareRow>,
}

fn discrepancy(approx: Option<f64>, exact: f64) -> Option<f64> {
    approx.map(|a| {
        if exact == 0.0 {
            a.abs()
        } else {
            (a - exact).abs() / exact.abs()
        }
    })
}

impl CompareSection {
    /// `exact` and `perturbative` must come from the matching solvers.
    pub fn build(
        cp: &CovariancePair,
        exact: &PrincipalDecomposition,
        perturbative: &PrincipalDecomposition,
        crv: Result<&CrvSolution, String>,
        constant_residual_var: f64,
    ) -> Self {
        let ex = exact.market_aligned();
        let pt = perturbative.market_aligned();
        let first = market_aligned_stats(cp, perturbative).ok();
        let crv_ok = crv.as_ref().ok();
        let lam_ex = *exact.eigenvalues_tilde.last().unwrap_or(&f64::NAN);
        let lam_pt = perturbative.eigenvalues_tilde[0];

        let mut rows = Vec::new();
        let mut push = |q: &str, e: Option<f64>, p: Option<f64>, c: Option<f64>| {
            if let Some(e) = e {
                rows.push(CompareRow {
                    quantity: q.to_string(),
                    exact: e,
                    perturbative: p,
                    constant_residual: c,
                    perturbative_discrepancy: discrepancy(p, e),
                    constant_residual_discrepancy: discrepancy(c, e),
                });
            }
        };
        push(
            "major_eigenvalue_tilde",
            Some(lam_ex),
            Some(lam_pt),
            crv_ok.map(|s| s.major.eigenvalue_tilde),
        );
        push(
            "major_variance",
            Some(lam_ex * exact.scale),
            Some(lam_pt * perturbative.scale),
            crv_ok.map(|s| s.major.eigenvalue_tilde * s.scale),
        );
        push(
            "market_aligned_weight",
            Some(ex.weight),
            Some(pt.weight),
            crv_ok.map(|s| s.major.weight),
        );
        push(
            "market_aligned_portfolio_variance",
            ex.portfolio_variance.finite(),
            first.as_ref().map(|m| m.portfolio_variance),
            crv_ok.map(|s| s.major.portfolio_variance),
        );
        push(
            "market_aligned_return_adjusted_volatility",
            ex.return_adjusted_volatility,
            first.as_ref().map(|m| m.return_adjusted_volatility),
            crv_ok.map(|s| s.major.return_adjusted_volatility),
        );
        push(
            "minor_average_variance",
            exact.minor_summary.map(|m| m.average_variance),
            perturbative.minor_summary.map(|m| m.average_variance),
            crv_ok.map(|s| s.residual_var),
        );
        Self {
            constant_residual_var,
            constant_residual_error: crv.err(),
            rows,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub tool: String,
    pub version: String,
    pub command: String,
    pub seed: Option<u64>,
    pub spectral_tolerances: SpectralTolerances,
    pub validation_thresholds: ValidationThresholds,
}

impl Provenance {
    pub fn new(
        command: &str,
        seed: Option<u64>,
        spectral_tolerances: SpectralTolerances,
        validation_thresholds: ValidationThresholds,
    ) -> Self {
        Self {
            tool: "pp".into(),
            version: env!("CARGO_PKG_VERSION").into(),
            command: command.into(),
            seed,
            spectral_tolerances,
            validation_thresholds,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::covariance::build_covariance;
    use crate::io::to_json_string;
    use crate::spectral::{solve_exact, solve_perturbative};
    use crate::universe::validate;

    fn universe() -> AssetUniverse {
        AssetUniverse::from_columns(
            &[0.01, 0.005, 0.0],
            &[0.04, 0.04, 0.04],
            &[0.5, 1.0, 1.5],
            0.05,
            0.01,
        )
        .with_riskless_rate(0.02)
    }

    #[test]
    fn infinite_marker_round_trips() {
        let s =
            serde_json::to_string(&[PortfolioVariance::Infinite, PortfolioVariance::Finite(0.5)])
                .unwrap();
        assert_eq!(s, r#"["infinite",0.5]"#);
        let back: Vec<PortfolioVariance> = serde_json::from_str(&s).unwrap();
        assert_eq!(
            back,
            [PortfolioVariance::Infinite, PortfolioVariance::Finite(0.5)]
        );
        assert!(serde_json::from_str::<PortfolioVariance>(r#""huge""#).is_err());
    }

    #[test]
    fn digest_tracks_inputs() {
        let u = universe();
        let a = UniverseDigest::of(&u);
        let mut v = u.clone();
        v.assets[1].beta = 1.0 + f64::EPSILON;
        assert_ne!(a.sha256, UniverseDigest::of(&v).sha256);
        assert_eq!(a.sha256, UniverseDigest::of(&u).sha256);
        assert_eq!(a.sha256.len(), 64);
    }

    #[test]
    fn full_report_round_trips() {
        let u = universe();
        let cp = build_covariance(&u).unwrap();
        let exact = solve_exact(&cp).unwrap();
        let pert = solve_perturbative(&cp);
        let crv = crate::crv::solve_crv(&u, 0.04).unwrap();
        let mut r = AnalysisReport::new(
            &u,
            validate(&u),
            Provenance::new("test", Some(7), Default::default(), Default::default()),
        );
        r.decomposition = Some(DecompositionSection::build(&u, &cp, &exact));
        r.crv = Some(CrvSection::build(
            &u,
            &crv,
            crate::crv::crv_limits(&u, 0.04).unwrap(),
        ));
        r.frontier = Some(FrontierSection::build(
            &exact,
            0.02,
            &[0.03, 0.05],
            Execution::Sequential,
        ));
        r.compare = Some(CompareSection::build(&cp, &exact, &pert, Ok(&crv), 0.04));
        let text = to_json_string(&r).unwrap();
        assert!(text.contains("\"infinite\""));
        let back: AnalysisReport = serde_json::from_str(&text).unwrap();
        assert_eq!(back, r);
        assert_eq!(to_json_string(&back).unwrap(), text);
    }

    #[test]
    fn eigenvectors_keyed_by_id() {
        let u = universe();
        let cp = build_covariance(&u).unwrap();
        let d = DecompositionSection::build(&u, &cp, &solve_exact(&cp).unwrap());
        let keys: Vec<_> = d.portfolios[0].eigenvector.keys().cloned().collect();
        assert_eq!(keys, ["A0", "A1", "A2"]);
    }
}
