//! Benchmark harness: generate seeded instances, run each method, record wall
//! time, objective and optimality gap, and aggregate per covariance family.
//!
//! A plan is JSON:
//!
//! ```json
//! {
//!   "alpha": 0.05,
//!   "parallel": false,
//!   "cells": [
//!     {"n": 10, "N": 20000, "family": "normal", "cov": ["Cov1", "Cov2"],
//!      "seeds": [1, 2, 3], "methods": ["evar_pd", "cvar_dual_lp"]}
//!   ]
//! }
//! ```
//!
//! `cov` defaults to both families, `alpha` to 0.05. Instances run one after
//! another unless `parallel` is set; parallel runs distort the timings.

use std::io::Write;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cvar::{solve_cvar_portfolio, CvarMethod};
use crate::error::Result;
use crate::evar::{grid_oracle_evar, solve_evar_portfolio, EvarProblemSpec, Method, PortfolioSolution};
use crate::ipm::IpmParams;
use crate::model::{RiskLevel, ScenarioSet};
use crate::scenario::{CovKind, Family, InstanceSpec};

/// Largest sample size for which the EVaR grid oracle is run.
pub const GRID_ORACLE_MAX_SCENARIOS: usize = 20_000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchCell {
    pub n: usize,
    #[serde(rename = "N")]
    pub big_n: usize,
    pub family: Family,
    #[serde(default = "both_covs")]
    pub cov: Vec<CovKind>,
    pub seeds: Vec<u64>,
    pub methods: Vec<Method>,
}

fn both_covs() -> Vec<CovKind> {
    vec![CovKind::Cov1, CovKind::Cov2]
}

fn default_alpha() -> f64 {
    0.05
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchPlan {
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    #[serde(default)]
    pub parallel: bool,
    pub cells: Vec<BenchCell>,
}

impl BenchPlan {
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Ok(serde_json::from_str(&std::fs::read_to_string(path)?)?)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum GapKind {
    /// Distance to an independent oracle optimum.
    Oracle,
    /// The solver's surrogate duality gap, an upper bound on its suboptimality.
    EtaBound,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Gap {
    pub value: f64,
    pub kind: GapKind,
}

/// Absolute optimality gap of `sol` on `scenarios`. CVaR solutions are
/// compared with the dual-LP optimum; EVaR solutions with the grid oracle for
/// `n <= 3` and moderate `N`, and otherwise report their own `eta_hat`.
pub fn compute_gap(sol: &PortfolioSolution, scenarios: &ScenarioSet) -> Result<Gap> {
    match sol.method {
        Method::CvarPrimalLp | Method::CvarDualLp => {
            let oracle = solve_cvar_portfolio(scenarios, sol.alpha, CvarMethod::DualLp)?;
            Ok(Gap {
                value: (sol.objective - oracle.objective).abs(),
                kind: GapKind::Oracle,
            })
        }
        Method::EvarPd if scenarios.n() <= 3 && scenarios.len() <= GRID_ORACLE_MAX_SCENARIOS => {
            let (oracle, _) = grid_oracle_evar(scenarios, sol.alpha, 0.001)?;
            Ok(Gap {
                value: (sol.objective - oracle).abs(),
                kind: GapKind::Oracle,
            })
        }
        Method::EvarPd => Ok(Gap {
            value: sol.eta_hat.unwrap_or(0.0),
            kind: GapKind::EtaBound,
        }),
    }
}

/// Runs one method on one instance.
pub fn run_method(
    method: Method,
    scenarios: &ScenarioSet,
    alpha: RiskLevel,
    params: &IpmParams,
) -> Result<PortfolioSolution> {
    match method {
        Method::EvarPd => solve_evar_portfolio(&EvarProblemSpec::new(scenarios.clone(), alpha), params, None),
        Method::CvarPrimalLp => solve_cvar_portfolio(scenarios, alpha, CvarMethod::PrimalLp),
        Method::CvarDualLp => solve_cvar_portfolio(scenarios, alpha, CvarMethod::DualLp),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BenchRecord {
    pub n: usize,
    #[serde(rename = "N")]
    pub big_n: usize,
    pub family: Family,
    pub cov: CovKind,
    pub method: Method,
    pub seed: u64,
    pub wall_ms: f64,
    pub objective: f64,
    pub gap: Option<Gap>,
    /// IPM iterations or simplex pivots.
    pub iterations: usize,
    /// `None` on success.
    pub error: Option<String>,
    #[serde(skip)]
    pub solution: Option<PortfolioSolution>,
}

impl BenchRecord {
    pub fn status(&self) -> String {
        match (&self.error, &self.gap) {
            (Some(e), _) => format!("error: {e}"),
            (
                None,
                Some(Gap {
                    kind: GapKind::EtaBound,
                    ..
                }),
            ) => "bound".into(),
            (None, _) => "ok".into(),
        }
    }
}

fn label<T: Serialize>(v: &T) -> String {
    match serde_json::to_value(v) {
        Ok(serde_json::Value::String(s)) => s,
        other => format!("{other:?}"),
    }
}

/// Generates every instance of the plan, solves it with each listed method
/// and records the outcome. Failures are recorded, not propagated.
pub fn run_benchmark(plan: &BenchPlan, params: &IpmParams) -> Result<Vec<BenchRecord>> {
    let alpha = RiskLevel::new(plan.alpha)?;
    let mut jobs = Vec::new();
    for cell in &plan.cells {
        for &cov in &cell.cov {
            for &seed in &cell.seeds {
                jobs.push((cell, cov, seed));
            }
        }
    }
    let run = |&(cell, cov, seed): &(&BenchCell, CovKind, u64)| -> Vec<BenchRecord> {
        let spec = InstanceSpec::new(cov, cell.family, cell.n, cell.big_n, seed);
        let base = |method: Method| BenchRecord {
            n: cell.n,
            big_n: cell.big_n,
            family: cell.family,
            cov,
            method,
            seed,
            wall_ms: f64::NAN,
            objective: f64::NAN,
            gap: None,
            iterations: 0,
            error: None,
            solution: None,
        };
        let scenarios = match spec.generate() {
            Ok(s) => s,
            Err(e) => {
                return cell
                    .methods
                    .iter()
                    .map(|&m| BenchRecord {
                        error: Some(e.to_string()),
                        ..base(m)
                    })
                    .collect()
            }
        };
        cell.methods
            .iter()
            .map(|&method| {
                let mut rec = base(method);
                match run_method(method, &scenarios, alpha, params) {
                    Ok(sol) => {
                        rec.wall_ms = sol.wall_ms;
                        rec.objective = sol.objective;
                        rec.iterations = sol.iterations;
                        match compute_gap(&sol, &scenarios) {
                            Ok(g) => rec.gap = Some(g),
                            Err(e) => rec.error = Some(format!("gap oracle failed: {e}")),
                        }
                        rec.solution = Some(sol);
                    }
                    Err(e) => rec.error = Some(e.to_string()),
                }
                rec
            })
            .collect()
    };
    let nested: Vec<Vec<BenchRecord>> = if plan.parallel {
        jobs.par_iter().map(run).collect()
    } else {
        jobs.iter().map(run).collect()
    };
    Ok(nested.into_iter().flatten().collect())
}

/// Writes `n,N,family,cov,method,seed,wall_ms,objective,gap,status`.
pub fn write_records_csv<W: Write>(records: &[BenchRecord], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "n",
        "N",
        "family",
        "cov",
        "method",
        "seed",
        "wall_ms",
        "objective",
        "gap",
        "status",
    ])?;
    for r in records {
        w.write_record([
            r.n.to_string(),
            r.big_n.to_string(),
            label(&r.family),
            label(&r.cov),
            label(&r.method),
            r.seed.to_string(),
            r.wall_ms.to_string(),
            r.objective.to_string(),
            r.gap.map(|g| g.value.to_string()).unwrap_or_default(),
            r.status(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Means and medians over seeds for one cell, method and covariance group.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BenchAggregate {
    pub n: usize,
    #[serde(rename = "N")]
    pub big_n: usize,
    pub family: Family,
    pub method: Method,
    /// `Cov1`, `Cov2`, or `Cov` for both pooled.
    pub cov: String,
    pub count: usize,
    pub failures: usize,
    pub mean_wall_ms: f64,
    pub median_wall_ms: f64,
    pub mean_objective: f64,
    pub mean_gap: Option<f64>,
}

fn median(mut v: Vec<f64>) -> f64 {
    if v.is_empty() {
        return f64::NAN;
    }
    v.sort_by(f64::total_cmp);
    let m = v.len() / 2;
    if v.len() % 2 == 1 {
        v[m]
    } else {
        0.5 * (v[m - 1] + v[m])
    }
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

/// Per-cell aggregates in order of first appearance: one row per covariance
/// family present, then the pooled `Cov` row when both are.
pub fn aggregate(records: &[BenchRecord]) -> Vec<BenchAggregate> {
    let mut keys: Vec<(usize, usize, Family, Method)> = Vec::new();
    for r in records {
        let k = (r.n, r.big_n, r.family, r.method);
        if !keys.contains(&k) {
            keys.push(k);
        }
    }
    let mut out = Vec::new();
    for (n, big_n, family, method) in keys {
        let group: Vec<&BenchRecord> = records
            .iter()
            .filter(|r| (r.n, r.big_n, r.family, r.method) == (n, big_n, family, method))
            .collect();
        let summarize = |name: &str, members: Vec<&&BenchRecord>| {
            let ok: Vec<&&BenchRecord> = members.iter().copied().filter(|r| r.error.is_none()).collect();
            let times: Vec<f64> = ok.iter().map(|r| r.wall_ms).collect();
            let objs: Vec<f64> = ok.iter().map(|r| r.objective).collect();
            let gaps: Vec<f64> = ok.iter().filter_map(|r| r.gap.map(|g| g.value)).collect();
            BenchAggregate {
                n,
                big_n,
                family,
                method,
                cov: name.to_owned(),
                count: ok.len(),
                failures: members.len() - ok.len(),
                mean_wall_ms: mean(&times),
                median_wall_ms: median(times),
                mean_objective: mean(&objs),
                mean_gap: (!gaps.is_empty()).then(|| mean(&gaps)),
            }
        };
        let mut kinds = 0;
        for (kind, name) in [(CovKind::Cov1, "Cov1"), (CovKind::Cov2, "Cov2")] {
            let members: Vec<&&BenchRecord> = group.iter().filter(|r| r.cov == kind).collect();
            if !members.is_empty() {
                out.push(summarize(name, members));
                kinds += 1;
            }
        }
        if kinds == 2 {
            out.push(summarize("Cov", group.iter().collect()));
        }
    }
    out
}

/// Writes the aggregates as CSV.
pub fn write_aggregates_csv<W: Write>(aggs: &[BenchAggregate], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "n",
        "N",
        "family",
        "method",
        "cov",
        "count",
        "failures",
        "mean_wall_ms",
        "median_wall_ms",
        "mean_objective",
        "mean_gap",
    ])?;
    for a in aggs {
        w.write_record([
            a.n.to_string(),
            a.big_n.to_string(),
            label(&a.family),
            label(&a.method),
            a.cov.clone(),
            a.count.to_string(),
            a.failures.to_string(),
            a.mean_wall_ms.to_string(),
            a.median_wall_ms.to_string(),
            a.mean_objective.to_string(),
            a.mean_gap.map(|g| g.to_string()).unwrap_or_default(),
        ])?;
    }
    w.flush()?;
    Ok(())
}
