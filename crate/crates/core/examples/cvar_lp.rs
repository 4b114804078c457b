//! Minimum-CVaR portfolio through both LP formulations, plus the text export
//! of the LP for use with other solvers.

use evar_portfolio::cvar::{
    build_dual_lp, default_max_pivots, simplex_solve, solve_cvar_portfolio, CvarMethod, LinearProgram,
};
use evar_portfolio::model::{portfolio_loss, RiskLevel};
use evar_portfolio::risk::cvar_sample;
use evar_portfolio::scenario::{CovKind, Family, InstanceSpec};

fn main() -> evar_portfolio::Result<()> {
    let scenarios = InstanceSpec::new(CovKind::Cov2, Family::Normal, 4, 300, 5).generate()?;
    let alpha = RiskLevel::new(0.05)?;
    for method in [CvarMethod::PrimalLp, CvarMethod::DualLp] {
        let sol = solve_cvar_portfolio(&scenarios, alpha, method)?;
        let check = cvar_sample(&portfolio_loss(sol.weights.weights(), &scenarios)?, alpha);
        println!(
            "{method:?}: CVaR {:.8} (sample {check:.8}), {} pivots, {:.1} ms, weights {:?}",
            sol.objective,
            sol.iterations,
            sol.wall_ms,
            sol.weights.weights()
        );
    }

    let text = build_dual_lp(&scenarios, alpha).to_text();
    println!(
        "dual LP export: {} bytes, first line {:?}",
        text.len(),
        text.lines().next().unwrap_or("")
    );
    let lp = LinearProgram::from_text(&text)?;
    let sol = simplex_solve(&lp, default_max_pivots(&lp))?;
    println!("re-read and solved: {:?}, objective {:.8}", sol.status, sol.objective);
    Ok(())
}
