//! A small benchmark grid: per-run records and per-cell aggregates as CSV.

use evar_portfolio::bench::{aggregate, run_benchmark, write_aggregates_csv, write_records_csv, BenchPlan};
use evar_portfolio::ipm::IpmParams;

const PLAN: &str = r#"{
  "alpha": 0.05,
  "parallel": true,
  "cells": [
    {"n": 3, "N": 2000, "family": "normal", "seeds": [1, 2, 3], "methods": ["evar_pd", "cvar_dual_lp"]},
    {"n": 10, "N": 5000, "family": "student_t", "seeds": [1, 2], "methods": ["evar_pd", "cvar_dual_lp"]}
  ]
}"#;

fn main() -> evar_portfolio::Result<()> {
    let plan: BenchPlan = serde_json::from_str(PLAN)?;
    let records = run_benchmark(&plan, &IpmParams::default())?;
    write_records_csv(&records, std::io::stdout())?;
    println!();
    write_aggregates_csv(&aggregate(&records), std::io::stdout())?;
    Ok(())
}
