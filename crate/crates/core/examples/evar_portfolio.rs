//! Minimum-EVaR portfolio on a generated instance, with the solver trace.

use evar_portfolio::evar::{solve_evar_portfolio, EvarProblemSpec};
use evar_portfolio::ipm::IpmParams;
use evar_portfolio::model::{portfolio_loss, Portfolio, RiskLevel};
use evar_portfolio::risk::evar_sample;
use evar_portfolio::scenario::{CovKind, Family, InstanceSpec};

fn main() -> evar_portfolio::Result<()> {
    let scenarios = InstanceSpec::new(CovKind::Cov1, Family::StudentT, 8, 20_000, 3).generate()?;
    let alpha = RiskLevel::new(0.05)?;
    let spec = EvarProblemSpec::new(scenarios.clone(), alpha);
    let sol = solve_evar_portfolio(&spec, &IpmParams::default(), None)?;

    println!(
        "EVaR {:.6} at t* = {:?}, {} iterations, {:.1} ms",
        sol.objective, sol.t_star, sol.iterations, sol.wall_ms
    );
    for (i, w) in sol.weights.weights().iter().enumerate() {
        println!("  asset {i}: {w:.4}");
    }
    let uniform = portfolio_loss(Portfolio::uniform(8).weights(), &scenarios)?;
    println!("equal weights would give EVaR {:.6}", evar_sample(&uniform, alpha).0);
    Ok(())
}
