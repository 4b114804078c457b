//! Pushing the losses below the VaR further down leaves VaR and CVaR unchanged
//! but lowers the EVaR.

use evar_portfolio::model::RiskLevel;
use evar_portfolio::risk::{cvar_sample, evar_sample, monotonicity_counterexample, var_sample};

fn main() -> evar_portfolio::Result<()> {
    let alpha = RiskLevel::new(0.05)?;
    println!("{:>6} {:>8} {:>8} {:>8}", "M", "VaR", "CVaR", "EVaR");
    for m in [0.1, 1.0, 10.0, 100.0] {
        let (x, y) = monotonicity_counterexample(0.0, 1.0, alpha, m, 10_000, 1)?;
        if m == 0.1 {
            println!(
                "{:>6} {:>8.4} {:>8.4} {:>8.4}",
                "X",
                var_sample(&x, alpha),
                cvar_sample(&x, alpha),
                evar_sample(&x, alpha).0
            );
        }
        println!(
            "{m:>6} {:>8.4} {:>8.4} {:>8.4}",
            var_sample(&y, alpha),
            cvar_sample(&y, alpha),
            evar_sample(&y, alpha).0
        );
    }
    Ok(())
}
