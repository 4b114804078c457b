//! Writes a synthetic daily price panel with gaps, in the format `evar ingest`
//! reads.
//!
//! ```text
//! cargo run --example make_price_panel -- data/prices_20.csv 20 1300 0.01 2024
//! ```

use evar_portfolio::prices::synthetic_price_csv;

fn main() -> evar_portfolio::Result<()> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let arg = |i: usize, default: &str| args.get(i).cloned().unwrap_or_else(|| default.to_owned());
    let path = arg(0, "prices.csv");
    let parse = |s: String| {
        s.parse::<f64>()
            .map_err(|e| evar_portfolio::Error::Usage(e.to_string()))
    };
    let n_assets = parse(arg(1, "20"))? as usize;
    let n_days = parse(arg(2, "1300"))? as usize;
    let missing = parse(arg(3, "0.01"))?;
    let seed = parse(arg(4, "2024"))? as u64;

    let csv = synthetic_price_csv(n_assets, n_days, missing, seed)?;
    std::fs::write(&path, &csv)?;
    println!("wrote {path}: {n_assets} assets, {n_days} days");
    Ok(())
}
