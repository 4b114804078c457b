//! Command-line front end. Results go to stdout (or `--out`) as JSON or CSV;
//! errors make the process exit nonzero.

use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::bench::{aggregate, run_benchmark, write_aggregates_csv, write_records_csv, BenchPlan};
use crate::compare::{compare_portfolios, DEFAULT_VAR_LEVELS};
use crate::cvar::{build_dual_lp_with, build_primal_lp_with, solve_cvar_portfolio_with, CvarMethod};
use crate::error::{Error, Result, ValidationError};
use crate::evar::{solve_evar_portfolio, EvarProblemSpec};
use crate::ipm::IpmParams;
use crate::model::{portfolio_loss, LossSample, Portfolio, RiskLevel, ScenarioSet};
use crate::prices::{load_price_csv, prices_to_returns, IngestSummary, MONTH_TRADING_DAYS};
use crate::risk::risk_report;
use crate::scenario::{CovKind, Family, InstanceSpec};

#[derive(Debug, Parser)]
#[command(
    name = "evar",
    version,
    about = "Minimum-EVaR and minimum-CVaR portfolios from return scenarios"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Args)]
pub struct RiskArgs {
    /// Risk level alpha (confidence 1 - alpha).
    #[arg(long, default_value_t = 0.05)]
    pub alpha: f64,
}

#[derive(Debug, Clone, Args)]
pub struct IpmArgs {
    /// Barrier reduction factor.
    #[arg(long, default_value_t = 5.0)]
    pub mu: f64,
    /// Feasibility and duality-gap tolerance.
    #[arg(long, default_value_t = 1e-6)]
    pub tol: f64,
}

impl IpmArgs {
    fn params(&self) -> Result<IpmParams> {
        let p = IpmParams {
            mu: self.mu,
            eps: self.tol,
            eps_feas: self.tol,
            ..IpmParams::default()
        };
        p.validate()?;
        Ok(p)
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum FamilyArg {
    Normal,
    T,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum CovArg {
    Cov1,
    Cov2,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum LpArg {
    Primal,
    Dual,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a seeded scenario CSV plus a `.json` sidecar describing it.
    Gen {
        /// Number of instruments.
        #[arg(long)]
        n: usize,
        /// Number of scenarios.
        #[arg(long = "scenarios", short = 'N')]
        big_n: usize,
        #[arg(long, value_enum, default_value = "normal")]
        family: FamilyArg,
        #[arg(long, value_enum, default_value = "cov1")]
        cov: CovArg,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Degrees of freedom of the t family.
        #[arg(long, default_value_t = 5.0)]
        nu: f64,
        #[arg(long, short)]
        out: PathBuf,
    },
    /// Minimum-EVaR portfolio by the primal-dual interior-point method.
    SolveEvar {
        /// Scenario CSV.
        scenarios: PathBuf,
        #[command(flatten)]
        risk: RiskArgs,
        #[command(flatten)]
        ipm: IpmArgs,
        /// Minimum expected portfolio return.
        #[arg(long)]
        min_return: Option<f64>,
        #[arg(long, short)]
        out: Option<PathBuf>,
    },
    /// Minimum-CVaR portfolio by the simplex method.
    SolveCvar {
        scenarios: PathBuf,
        #[command(flatten)]
        risk: RiskArgs,
        #[arg(long, value_enum, default_value = "dual")]
        method: LpArg,
        #[arg(long)]
        min_return: Option<f64>,
        /// Also write the LP in text form.
        #[arg(long)]
        export_lp: Option<PathBuf>,
        #[arg(long, short)]
        out: Option<PathBuf>,
    },
    /// VaR, CVaR and EVaR of a portfolio's loss (or of a loss column).
    EvalRisk {
        scenarios: PathBuf,
        #[command(flatten)]
        risk: RiskArgs,
        /// Solution JSON, JSON array, or comma-separated weights; uniform if absent.
        #[arg(long)]
        weights: Option<String>,
        /// Treat the single column of the CSV as losses rather than returns.
        #[arg(long)]
        losses: bool,
    },
    /// Run a benchmark plan and write per-run records as CSV.
    Bench {
        plan: PathBuf,
        #[command(flatten)]
        ipm: IpmArgs,
        /// Override the plan's risk level.
        #[arg(long)]
        alpha: Option<f64>,
        /// Replace every cell's seeds by this one.
        #[arg(long)]
        seed: Option<u64>,
        /// Solve independent instances in parallel.
        #[arg(long)]
        parallel: bool,
        #[arg(long, short)]
        out: Option<PathBuf>,
        /// Per-cell means and medians as CSV.
        #[arg(long)]
        summary: Option<PathBuf>,
    },
    /// Turn a daily price CSV into overlapping horizon-return scenarios.
    Ingest {
        prices: PathBuf,
        #[arg(long, default_value_t = MONTH_TRADING_DAYS)]
        horizon: usize,
        #[arg(long, short)]
        out: PathBuf,
    },
    /// Compare two portfolios on a scenario set.
    Compare {
        scenarios: PathBuf,
        /// First portfolio (solution JSON, JSON array or comma list).
        a: String,
        /// Second portfolio.
        b: String,
        /// VaR confidence levels.
        #[arg(long, value_delimiter = ',')]
        levels: Option<Vec<f64>>,
    },
}

/// Reads weights from a solution JSON (`{"weights": [...]}`), a JSON array,
/// a file holding either, or an inline comma-separated list.
pub fn parse_weights(arg: &str) -> Result<Portfolio> {
    let text = if Path::new(arg).is_file() {
        std::fs::read_to_string(arg)?
    } else {
        arg.to_owned()
    };
    let trimmed = text.trim();
    let raw: Vec<f64> = if trimmed.starts_with('{') {
        let v: serde_json::Value = serde_json::from_str(trimmed)?;
        serde_json::from_value(v.get("weights").cloned().unwrap_or_default())?
    } else if trimmed.starts_with('[') {
        serde_json::from_str(trimmed)?
    } else {
        trimmed
            .split(',')
            .map(|t| {
                t.trim()
                    .parse()
                    .map_err(|e| ValidationError::Domain(format!("bad weight {t:?}: {e}")))
            })
            .collect::<Result<_, _>>()?
    };
    Ok(crate::model::validate_portfolio(&raw)?)
}

fn emit(out: Option<&Path>, stdout: &mut dyn Write, text: &str) -> Result<()> {
    match out {
        Some(path) => std::fs::write(path, text)?,
        None => writeln!(stdout, "{text}")?,
    }
    Ok(())
}

fn pretty(v: &impl serde::Serialize) -> Result<String> {
    Ok(serde_json::to_string_pretty(v)?)
}

/// Runs one parsed command, writing results to `stdout` unless redirected.
pub fn execute(cli: Cli, stdout: &mut dyn Write) -> Result<()> {
    match cli.command {
        Command::Gen {
            n,
            big_n,
            family,
            cov,
            seed,
            nu,
            out,
        } => {
            let kind = match cov {
                CovArg::Cov1 => CovKind::Cov1,
                CovArg::Cov2 => CovKind::Cov2,
            };
            let fam = match family {
                FamilyArg::Normal => Family::Normal,
                FamilyArg::T => Family::StudentT,
            };
            let mut spec = InstanceSpec::new(kind, fam, n, big_n, seed);
            spec.dist.nu = nu;
            let set = spec.generate()?;
            spec.write_with_sidecar(&set, &out)?;
            writeln!(stdout, "{}", pretty(&spec)?)?;
        }
        Command::SolveEvar {
            scenarios,
            risk,
            ipm,
            min_return,
            out,
        } => {
            let set = ScenarioSet::load_csv(&scenarios)?;
            let mut spec = EvarProblemSpec::new(set, RiskLevel::new(risk.alpha)?);
            if let Some(r) = min_return {
                spec = spec.with_min_return(r);
            }
            let sol = solve_evar_portfolio(&spec, &ipm.params()?, None)?;
            emit(out.as_deref(), stdout, &pretty(&sol.to_json())?)?;
        }
        Command::SolveCvar {
            scenarios,
            risk,
            method,
            min_return,
            export_lp,
            out,
        } => {
            let set = ScenarioSet::load_csv(&scenarios)?;
            let alpha = RiskLevel::new(risk.alpha)?;
            let m = match method {
                LpArg::Primal => CvarMethod::PrimalLp,
                LpArg::Dual => CvarMethod::DualLp,
            };
            if let Some(path) = export_lp {
                let lp = match m {
                    CvarMethod::PrimalLp => build_primal_lp_with(&set, alpha, min_return),
                    CvarMethod::DualLp => build_dual_lp_with(&set, alpha, min_return),
                };
                std::fs::write(path, lp.to_text())?;
            }
            let sol = solve_cvar_portfolio_with(&set, alpha, m, min_return)?;
            emit(out.as_deref(), stdout, &pretty(&sol.to_json())?)?;
        }
        Command::EvalRisk {
            scenarios,
            risk,
            weights,
            losses,
        } => {
            let set = ScenarioSet::load_csv(&scenarios)?;
            let alpha = RiskLevel::new(risk.alpha)?;
            let sample = if losses {
                if set.n() != 1 || weights.is_some() {
                    return Err(
                        ValidationError::Domain("--losses needs a single-column CSV and no weights".into()).into(),
                    );
                }
                LossSample::new(set.column(0), set.probs().to_vec())?
            } else {
                let w = match weights {
                    Some(arg) => parse_weights(&arg)?,
                    None => Portfolio::uniform(set.n()),
                };
                portfolio_loss(w.weights(), &set)?
            };
            writeln!(stdout, "{}", pretty(&risk_report(&sample, alpha))?)?;
        }
        Command::Bench {
            plan,
            ipm,
            alpha,
            seed,
            parallel,
            out,
            summary,
        } => {
            let mut plan = BenchPlan::load(&plan)?;
            if let Some(a) = alpha {
                plan.alpha = a;
            }
            if let Some(s) = seed {
                for cell in &mut plan.cells {
                    cell.seeds = vec![s];
                }
            }
            plan.parallel |= parallel;
            let records = run_benchmark(&plan, &ipm.params()?)?;
            match out {
                Some(path) => write_records_csv(&records, std::fs::File::create(path)?)?,
                None => write_records_csv(&records, &mut *stdout)?,
            }
            if let Some(path) = summary {
                write_aggregates_csv(&aggregate(&records), std::fs::File::create(path)?)?;
            }
        }
        Command::Ingest { prices, horizon, out } => {
            let panel = load_price_csv(&prices)?;
            let set = prices_to_returns(&panel, horizon)?;
            set.save_csv(&out)?;
            writeln!(stdout, "{}", pretty(&IngestSummary::new(&panel, horizon, &set))?)?;
        }
        Command::Compare {
            scenarios,
            a,
            b,
            levels,
        } => {
            let set = ScenarioSet::load_csv(&scenarios)?;
            let levels = levels.unwrap_or_else(|| DEFAULT_VAR_LEVELS.to_vec());
            let report = compare_portfolios(&parse_weights(&a)?, &parse_weights(&b)?, &set, &levels)?;
            writeln!(stdout, "{}", pretty(&report)?)?;
        }
    }
    Ok(())
}

/// Parses `args` (program name first) and runs the command.
pub fn run<I, T>(args: I, stdout: &mut dyn Write) -> Result<()>
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = Cli::try_parse_from(args).map_err(|e| Error::Usage(e.to_string()))?;
    execute(cli, stdout)
}
