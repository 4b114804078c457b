//! Generated instances: the two covariance families and the normal/t pairing.

use evar_portfolio::scenario::{gen_cov1, gen_cov2, CovKind, Family, InstanceSpec};

fn kurtosis(x: &[f64]) -> f64 {
    let n = x.len() as f64;
    let m = x.iter().sum::<f64>() / n;
    let m2 = x.iter().map(|v| (v - m).powi(2)).sum::<f64>() / n;
    let m4 = x.iter().map(|v| (v - m).powi(4)).sum::<f64>() / n;
    m4 / (m2 * m2)
}

fn main() -> evar_portfolio::Result<()> {
    println!("cov1 (diagonally dominant):\n{:.3}", gen_cov1(3, 1));
    println!("cov2 (M M^T):\n{:.3}", gen_cov2(3, 1));

    for family in [Family::Normal, Family::StudentT] {
        let set = InstanceSpec::new(CovKind::Cov1, family, 3, 100_000, 1).generate()?;
        println!(
            "{family:?}: first row {:?}, kurtosis of asset 0 {:.2}",
            set.row(0),
            kurtosis(&set.column(0))
        );
    }
    Ok(())
}
