//! Command-line front end of the `pp` binary.

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::covariance::build_covariance;
use crate::crv::{crv_limits, solve_crv_with};
use crate::error::{Error, Result};
use crate::frontier::sweep_targets;
use crate::io::{load_universe, parse_assets, parse_config, parse_real, to_json_string};
use crate::mcsim::{simulate, verify_decorrelation, SimConfig};
use crate::par::Execution;
use crate::report::{
    AnalysisReport, CompareSection, CrvSection, DecompositionSection, FrontierSection, Provenance,
    SimulationSection,
};
use crate::spectral::{solve_exact_with, solve_perturbative, SolverOptions, SpectralTolerances};
use crate::universe::{validate_with, AssetUniverse, ValidationReport, ValidationThresholds};

#[derive(Debug, Parser)]
#[command(
    name = "pp",
    version,
    about = "Principal portfolio analysis of single-index universes"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    tol: TolArgs,
}

#[derive(Debug, Args)]
struct TolArgs {
    /// Convergence tolerance of the secular root finder.
    #[arg(long, global = true, default_value_t = 1e-14, value_parser = real)]
    tol_secular: f64,
    /// Rescaled couplings below this are deflated.
    #[arg(long, global = true, default_value_t = 1e-14, value_parser = real)]
    tol_coupling: f64,
    /// Relative gap below which two residual variances count as equal.
    #[arg(long, global = true, default_value_t = 1e-12, value_parser = real)]
    tol_repeated_pole: f64,
    /// Relative weights below this mark a portfolio critically leveraged.
    #[arg(long, global = true, default_value_t = 1e-10, value_parser = real)]
    tol_critical_weight: f64,
    #[arg(long, global = true, default_value_t = 200)]
    tol_max_iterations: usize,
    /// Largest rescaled residual variance before the perturbative warning.
    #[arg(long, global = true, default_value_t = 0.1, value_parser = real)]
    tol_gamma_warn: f64,
    /// tan(theta) below which betas count as uniform.
    #[arg(long, global = true, default_value_t = 1e-6, value_parser = real)]
    tol_uniform_beta: f64,
}

impl TolArgs {
    fn spectral(&self) -> SpectralTolerances {
        SpectralTolerances {
            secular: self.tol_secular,
            coupling: self.tol_coupling,
            repeated_pole: self.tol_repeated_pole,
            critical_weight: self.tol_critical_weight,
            max_iterations: self.tol_max_iterations,
        }
    }

    fn validation(&self) -> ValidationThresholds {
        ValidationThresholds {
            gamma_sq_warn: self.tol_gamma_warn,
            uniform_beta_tan: self.tol_uniform_beta,
        }
    }
}

#[derive(Debug, Args)]
struct Io {
    /// Asset CSV (`id,alpha_mean,residual_var,beta`).
    #[arg(long)]
    input: PathBuf,
    /// Market config JSON.
    #[arg(long)]
    config: PathBuf,
    /// Report path; stdout when omitted.
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum MethodArg {
    Exact,
    Perturbative,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Principal portfolios of the universe.
    Decompose {
        #[command(flatten)]
        io: Io,
        #[arg(long, value_enum, default_value_t = MethodArg::Exact)]
        method: MethodArg,
    },
    /// Closed form under a common residual variance.
    Crv {
        #[command(flatten)]
        io: Io,
        /// Defaults to the mean residual variance of the universe.
        #[arg(long, value_parser = real)]
        residual_var: Option<f64>,
    },
    /// Efficient frontier over the riskless asset and principal portfolios.
    Frontier {
        #[command(flatten)]
        io: Io,
        #[arg(long = "target-return", value_parser = real, allow_negative_numbers = true)]
        target_return: Vec<f64>,
        /// `lo:hi:steps`
        #[arg(long, allow_hyphen_values = true)]
        sweep: Option<String>,
    },
    /// Monte Carlo check that principal portfolios are uncorrelated.
    Simulate {
        #[command(flatten)]
        io: Io,
        #[arg(long, default_value_t = 100_000)]
        paths: usize,
        #[arg(long, env = "PP_SEED", default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 1)]
        horizon: usize,
    },
    /// Check the universe and report violations and warnings.
    Validate {
        #[command(flatten)]
        io: Io,
    },
    /// Exact, first-order and constant-residual results side by side.
    Compare {
        #[command(flatten)]
        io: Io,
    },
}

fn real(s: &str) -> std::result::Result<f64, String> {
    parse_real(s, "argument").map_err(|e| e.to_string())
}

/// Runs `pp` with the given arguments (program name first) and returns the
/// process exit code.
pub fn run_cli<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match run(&cli) {
        Ok(()) => 0,
        Err(e) => {
            report_error(&e);
            e.exit_code()
        }
    }
}

fn report_error(e: &Error) {
    match e {
        Error::Validation(violations) => {
            eprintln!("pp: universe failed validation");
            for v in violations {
                eprintln!("  - {v}");
            }
        }
        _ => eprintln!("pp: {e}"),
    }
}

fn load(io: &Io, th: &ValidationThresholds) -> Result<(AssetUniverse, ValidationReport)> {
    let (u, report) = load_universe(&io.input, &io.config, th)?;
    for w in &report.warnings {
        eprintln!("pp: warning: {w}");
    }
    Ok((u, report))
}

fn emit(report: &AnalysisReport, output: Option<&Path>) -> Result<()> {
    let text = to_json_string(report)?;
    match output {
        Some(path) => fs::write(path, text)?,
        None => {
            let mut out = std::io::stdout().lock();
            out.write_all(text.as_bytes())?;
            out.flush()?;
        }
    }
    Ok(())
}

fn parse_sweep(spec: &str) -> Result<Vec<f64>> {
    let bad = || Error::InvalidArgument(format!("--sweep expects lo:hi:steps, got {spec:?}"));
    let parts: Vec<&str> = spec.split(':').collect();
    let [lo, hi, steps] = parts[..] else {
        return Err(bad());
    };
    let lo = parse_real(lo, "--sweep lo")?;
    let hi = parse_real(hi, "--sweep hi")?;
    let steps: usize = steps.trim().parse().map_err(|_| bad())?;
    Ok(sweep_targets(lo, hi, steps))
}

fn run(cli: &Cli) -> Result<()> {
    let th = cli.tol.validation();
    let opts = SolverOptions {
        tol: cli.tol.spectral(),
        exec: Execution::default(),
    };
    let provenance = |name: &str, seed: Option<u64>| Provenance::new(name, seed, opts.tol, th);

    match &cli.command {
        Command::Validate { io } => {
            let assets = parse_assets(fs::File::open(&io.input)?)?;
            let config = parse_config(&fs::read_to_string(&io.config)?)?;
            let u = AssetUniverse {
                assets,
                market_mean: config.market_mean,
                market_var: config.market_var,
                riskless_rate: config.riskless_rate,
            };
            let validation = validate_with(&u, &th);
            for w in &validation.warnings {
                eprintln!("pp: warning: {w}");
            }
            let violations = validation.violations.clone();
            emit(
                &AnalysisReport::new(&u, validation, provenance("validate", None)),
                io.output.as_deref(),
            )?;
            if violations.is_empty() {
                Ok(())
            } else {
                Err(Error::Validation(violations))
            }
        }
        Command::Decompose { io, method } => {
            let (u, validation) = load(io, &th)?;
            let cp = build_covariance(&u)?;
            let d = match method {
                MethodArg::Exact => solve_exact_with(&cp, &opts)?,
                MethodArg::Perturbative => solve_perturbative(&cp),
            };
            let mut r = AnalysisReport::new(&u, validation, provenance("decompose", None));
            r.decomposition = Some(DecompositionSection::build(&u, &cp, &d));
            emit(&r, io.output.as_deref())
        }
        Command::Crv { io, residual_var } => {
            let (u, validation) = load(io, &th)?;
            let rv = residual_var.unwrap_or_else(|| mean_residual_var(&u));
            let s = solve_crv_with(&u, rv, th.uniform_beta_tan)?;
            let limits = crv_limits(&u, rv)?;
            let mut r = AnalysisReport::new(&u, validation, provenance("crv", None));
            r.crv = Some(CrvSection::build(&u, &s, limits));
            emit(&r, io.output.as_deref())
        }
        Command::Frontier {
            io,
            target_return,
            sweep,
        } => {
            let (u, validation) = load(io, &th)?;
            let r0 = u.riskless_rate.ok_or(Error::NoRisklessAsset)?;
            let mut targets = target_return.clone();
            if let Some(spec) = sweep {
                targets.extend(parse_sweep(spec)?);
            }
            if targets.is_empty() {
                return Err(Error::InvalidArgument(
                    "frontier needs --target-return or --sweep".into(),
                ));
            }
            let cp = build_covariance(&u)?;
            let d = solve_exact_with(&cp, &opts)?;
            let mut r = AnalysisReport::new(&u, validation, provenance("frontier", None));
            r.frontier = Some(FrontierSection::build(&d, r0, &targets, opts.exec));
            emit(&r, io.output.as_deref())
        }
        Command::Simulate {
            io,
            paths,
            seed,
            horizon,
        } => {
            let (u, validation) = load(io, &th)?;
            if *paths == 0 || *horizon == 0 {
                return Err(Error::InvalidArgument(
                    "--paths and --horizon must be positive".into(),
                ));
            }
            let cp = build_covariance(&u)?;
            let d = solve_exact_with(&cp, &opts)?;
            let cfg = SimConfig {
                paths: *paths,
                seed: *seed,
                horizon: *horizon,
                exec: opts.exec,
            };
            let sim = verify_decorrelation(&simulate(&u, &cfg), &d)?;
            if !sim.passed {
                eprintln!(
                    "pp: warning: max principal correlation {:.3e} exceeds {:.3e}",
                    sim.max_offdiag_corr, sim.threshold
                );
            }
            let mut r = AnalysisReport::new(&u, validation, provenance("simulate", Some(*seed)));
            r.simulation = Some(SimulationSection::build(&u, &cfg, &sim));
            emit(&r, io.output.as_deref())
        }
        Command::Compare { io } => {
            let (u, validation) = load(io, &th)?;
            let cp = build_covariance(&u)?;
            let exact = solve_exact_with(&cp, &opts)?;
            let pert = solve_perturbative(&cp);
            let rv = mean_residual_var(&u);
            let crv = solve_crv_with(&u, rv, th.uniform_beta_tan).map_err(|e| e.to_string());
            let mut r = AnalysisReport::new(&u, validation, provenance("compare", None));
            r.compare = Some(CompareSection::build(
                &cp,
                &exact,
                &pert,
                crv.as_ref().map_err(String::clone),
                rv,
            ));
            emit(&r, io.output.as_deref())
        }
    }
}

fn mean_residual_var(u: &AssetUniverse) -> f64 {
    u.assets.iter().map(|a| a.residual_var).sum::<f64>() / u.len() as f64
}
