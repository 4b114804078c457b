//! Daily prices to monthly returns, then minimum-EVaR and minimum-CVaR
//! portfolios compared on the same scenarios.

use evar_portfolio::compare::{compare_portfolios, DEFAULT_VAR_LEVELS};
use evar_portfolio::cvar::{solve_cvar_portfolio, CvarMethod};
use evar_portfolio::evar::{solve_evar_portfolio, EvarProblemSpec};
use evar_portfolio::ipm::IpmParams;
use evar_portfolio::model::RiskLevel;
use evar_portfolio::prices::{load_price_csv, prices_to_returns, MONTH_TRADING_DAYS};

fn main() -> evar_portfolio::Result<()> {
    let path = std::env::args()
        .nth(1)
        .unwrap_or_else(|| concat!(env!("CARGO_MANIFEST_DIR"), "/data/prices_20.csv").to_owned());
    let panel = load_price_csv(&path)?;
    let returns = prices_to_returns(&panel, MONTH_TRADING_DAYS)?;
    println!(
        "{} assets, {} dates, {} gaps filled, {} monthly scenarios",
        panel.assets().len(),
        panel.dates().len(),
        panel.interpolated_count(),
        returns.len()
    );

    let alpha = RiskLevel::new(0.05)?;
    let evar = solve_evar_portfolio(
        &EvarProblemSpec::new(returns.clone(), alpha),
        &IpmParams::default(),
        None,
    )?;
    let cvar = solve_cvar_portfolio(&returns, alpha, CvarMethod::DualLp)?;
    let report = compare_portfolios(&evar.weights, &cvar.weights, &returns, &DEFAULT_VAR_LEVELS)?;

    println!("{:>10} {:>10} {:>10} {:>8}", "metric", "EVaR", "CVaR", "ratio");
    for row in &report.rows {
        let ratio = row.ratio.map_or("-".to_owned(), |r| format!("{r:.3}"));
        println!("{:>10} {:>10.5} {:>10.5} {ratio:>8}", row.metric, row.a, row.b);
    }
    println!("L1 distance between the portfolios: {:.4}", report.distance);
    Ok(())
}
