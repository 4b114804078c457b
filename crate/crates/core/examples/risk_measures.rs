//! VaR, CVaR and EVaR of a sample, next to the closed forms for a normal law.

use evar_portfolio::model::{LossSample, RiskLevel};
use evar_portfolio::risk::{risk_normal_closed_form, risk_report, Measure};
use evar_portfolio::scenario::sample_mvn;
use nalgebra::DMatrix;

fn main() -> evar_portfolio::Result<()> {
    let alpha = RiskLevel::new(0.05)?;
    let draws = sample_mvn(&[0.0], &DMatrix::identity(1, 1), 50_000, 7)?;
    let sample = LossSample::uniform(draws.column(0))?;
    let report = risk_report(&sample, alpha);

    println!("{:>6} {:>10} {:>10}", "", "sample", "N(0,1)");
    for (name, m, v) in [
        ("VaR", Measure::VaR, report.var),
        ("CVaR", Measure::CVaR, report.cvar),
        ("EVaR", Measure::EVaR, report.evar),
    ] {
        println!(
            "{name:>6} {v:>10.4} {:>10.4}",
            risk_normal_closed_form(0.0, 1.0, alpha, m)?
        );
    }
    println!("EVaR minimizer: {:?}", report.evar_t_star);
    Ok(())
}
