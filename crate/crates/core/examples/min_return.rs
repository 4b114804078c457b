//! The EVaR/return frontier: minimum EVaR under increasing return floors.

use evar_portfolio::evar::{solve_evar_portfolio, EvarProblemSpec};
use evar_portfolio::ipm::IpmParams;
use evar_portfolio::model::RiskLevel;
use evar_portfolio::scenario::{CovKind, DistributionSpec, Family, InstanceSpec};

fn main() -> evar_portfolio::Result<()> {
    let mut inst = InstanceSpec::new(CovKind::Cov1, Family::Normal, 5, 5_000, 11);
    inst.dist = DistributionSpec {
        mean: Some(vec![0.01, 0.02, 0.03, 0.04, 0.05]),
        ..DistributionSpec::normal()
    };
    let scenarios = inst.generate()?;
    let means = scenarios.mean_returns();
    let top = means.iter().copied().fold(f64::MIN, f64::max);
    let base = EvarProblemSpec::new(scenarios, RiskLevel::new(0.05)?);
    let params = IpmParams::default();
    let expected = |w: &[f64]| -> f64 { w.iter().zip(&means).map(|(w, r)| w * r).sum() };

    // Floors between the unconstrained optimum's return and the best asset.
    let free = solve_evar_portfolio(&base, &params, None)?;
    let low = expected(free.weights.weights());
    println!("{:>8} {:>10} {:>10}", "floor", "EVaR", "return");
    println!("{:>8} {:>10.4} {low:>10.4}", "none", free.objective);
    for k in 1..=5 {
        let floor = low + (top - low) * k as f64 / 6.0;
        let sol = solve_evar_portfolio(&base.clone().with_min_return(floor), &params, None)?;
        println!(
            "{floor:>8.4} {:>10.4} {:>10.4}",
            sol.objective,
            expected(sol.weights.weights())
        );
    }
    // Above the best mean return the floor cannot be met.
    let err = solve_evar_portfolio(&base.with_min_return(top + 0.01), &params, None).unwrap_err();
    println!("floor {:.4}: {err}", top + 0.01);
    Ok(())
}
