//! Daily price panels and the overlapping horizon returns built from them.
//!
//! The CSV layout is `date,asset1,...,assetk` with ISO dates. Empty cells and
//! `NA`/`NaN`/`null` mark missing prices. Interior gaps are filled by linear
//! interpolation in price space (by row position, not calendar distance);
//! leading and trailing gaps are left missing, which shortens the asset's
//! usable window instead of inventing prices.

use std::io::Read;
use std::path::Path;

use chrono::NaiveDate;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, Uniform};
use serde::Serialize;

use crate::error::{Error, Result, ValidationError};
use crate::model::ScenarioSet;
use crate::scenario::{gen_cov1, sample_mvt};

/// Trading days in one month, the default return horizon.
pub const MONTH_TRADING_DAYS: usize = 21;

#[derive(Debug, Clone, PartialEq)]
pub struct PricePanel {
    dates: Vec<NaiveDate>,
    assets: Vec<String>,
    /// Per asset, per date; `None` outside the asset's observed window.
    series: Vec<Vec<Option<f64>>>,
    interpolated: usize,
}

/// Fills interior `None`s linearly between their observed neighbours and
/// returns how many were filled.
fn interpolate(series: &mut [Option<f64>]) -> usize {
    let observed: Vec<usize> = (0..series.len()).filter(|&i| series[i].is_some()).collect();
    let mut filled = 0;
    for pair in observed.windows(2) {
        let (a, b) = (pair[0], pair[1]);
        let (pa, pb) = (series[a].unwrap(), series[b].unwrap());
        for i in a + 1..b {
            let s = (i - a) as f64 / (b - a) as f64;
            series[i] = Some(pa + s * (pb - pa));
            filled += 1;
        }
    }
    filled
}

fn is_missing(cell: &str) -> bool {
    cell.is_empty() || ["na", "nan", "null"].contains(&cell.to_ascii_lowercase().as_str())
}

impl PricePanel {
    /// Parses the price CSV layout from any reader.
    pub fn parse<R: Read>(reader: R) -> Result<Self, ValidationError> {
        let bad = |line: usize, msg: String| ValidationError::Domain(format!("line {line}: {msg}"));
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
        let header = rdr.headers().map_err(|e| bad(1, e.to_string()))?.clone();
        if header.len() < 2 {
            return Err(bad(1, "expected a date column and at least one asset".into()));
        }
        let assets: Vec<String> = header.iter().skip(1).map(str::to_owned).collect();
        let k = assets.len();
        let mut dates = Vec::new();
        let mut series: Vec<Vec<Option<f64>>> = vec![Vec::new(); k];
        for (idx, rec) in rdr.records().enumerate() {
            let line = idx + 2;
            let rec = rec.map_err(|e| bad(line, e.to_string()))?;
            if rec.len() != k + 1 {
                return Err(bad(line, format!("expected {} fields, found {}", k + 1, rec.len())));
            }
            let date = NaiveDate::parse_from_str(&rec[0], "%Y-%m-%d")
                .map_err(|e| bad(line, format!("bad date {:?}: {e}", &rec[0])))?;
            if dates.last().is_some_and(|d| *d >= date) {
                return Err(bad(line, format!("date {date} does not increase")));
            }
            dates.push(date);
            for (a, cell) in rec.iter().skip(1).enumerate() {
                let v = if is_missing(cell) {
                    None
                } else {
                    let p: f64 = cell
                        .parse()
                        .map_err(|e| bad(line, format!("bad price {cell:?}: {e}")))?;
                    if !(p > 0.0 && p.is_finite()) {
                        return Err(bad(line, format!("price {p} of {} is not positive", assets[a])));
                    }
                    Some(p)
                };
                series[a].push(v);
            }
        }
        let mut interpolated = 0;
        for (a, s) in series.iter_mut().enumerate() {
            let observed = s.iter().flatten().count();
            if observed < 2 {
                return Err(ValidationError::Domain(format!(
                    "asset {} has {observed} observed prices, need at least 2",
                    assets[a]
                )));
            }
            interpolated += interpolate(s);
        }
        Ok(Self {
            dates,
            assets,
            series,
            interpolated,
        })
    }

    pub fn dates(&self) -> &[NaiveDate] {
        &self.dates
    }

    pub fn assets(&self) -> &[String] {
        &self.assets
    }

    pub fn series(&self, asset: usize) -> &[Option<f64>] {
        &self.series[asset]
    }

    /// Number of interior prices filled by interpolation.
    pub fn interpolated_count(&self) -> usize {
        self.interpolated
    }

    /// First and last date index with a price for `asset`.
    pub fn window(&self, asset: usize) -> (usize, usize) {
        let s = &self.series[asset];
        let first = s.iter().position(Option::is_some).expect("at least 2 observations");
        let last = s.iter().rposition(Option::is_some).expect("at least 2 observations");
        (first, last)
    }

    /// Date indices where every asset has a price.
    pub fn common_window(&self) -> Option<(usize, usize)> {
        let (mut lo, mut hi) = (0, usize::MAX);
        for a in 0..self.assets.len() {
            let (f, l) = self.window(a);
            lo = lo.max(f);
            hi = hi.min(l);
        }
        (lo <= hi).then_some((lo, hi))
    }
}

/// Reads a price CSV from disk.
pub fn load_price_csv(path: impl AsRef<Path>) -> Result<PricePanel> {
    let path = path.as_ref();
    let file = std::fs::File::open(path)?;
    PricePanel::parse(file).map_err(|e| Error::Input {
        path: path.to_owned(),
        msg: e.to_string(),
    })
}

/// Overlapping simple returns `p[t + horizon] / p[t] - 1` over the dates all
/// assets share, one scenario per start date, equally weighted.
pub fn prices_to_returns(panel: &PricePanel, horizon: usize) -> Result<ScenarioSet> {
    if horizon == 0 {
        return Err(ValidationError::Domain("horizon must be at least 1".into()).into());
    }
    let (lo, hi) = panel
        .common_window()
        .ok_or_else(|| ValidationError::Domain("assets share no common date window".into()))?;
    if hi - lo < horizon {
        return Err(ValidationError::Domain(format!(
            "common window of {} dates is too short for horizon {horizon}",
            hi - lo + 1
        ))
        .into());
    }
    let k = panel.assets.len();
    let mut returns = Vec::with_capacity((hi - lo + 1 - horizon) * k);
    for t in lo..=hi - horizon {
        for s in &panel.series {
            returns.push(s[t + horizon].unwrap() / s[t].unwrap() - 1.0);
        }
    }
    Ok(ScenarioSet::from_row_major(returns, k, None)?)
}

/// Summary of an ingestion run, as printed by the command line.
#[derive(Debug, Clone, Serialize)]
pub struct IngestSummary {
    pub assets: Vec<String>,
    pub dates: usize,
    pub first_date: NaiveDate,
    pub last_date: NaiveDate,
    pub interpolated: usize,
    pub horizon: usize,
    pub scenarios: usize,
}

impl IngestSummary {
    pub fn new(panel: &PricePanel, horizon: usize, scenarios: &ScenarioSet) -> Self {
        Self {
            assets: panel.assets.clone(),
            dates: panel.dates.len(),
            first_date: panel.dates[0],
            last_date: *panel.dates.last().unwrap(),
            interpolated: panel.interpolated,
            horizon,
            scenarios: scenarios.len(),
        }
    }
}

/// Synthetic daily price panel in the CSV layout: correlated Student-t log
/// returns (5 degrees of freedom) with small drifts, starting on 2015-01-02
/// and skipping weekends. About `missing_frac` of the interior cells are
/// blanked, and the first two assets start and end with a few missing days.
pub fn synthetic_price_csv(n_assets: usize, n_days: usize, missing_frac: f64, seed: u64) -> Result<String> {
    let cov = gen_cov1(n_assets, seed) * (1e-4 / n_assets as f64);
    let drift: Vec<f64> = (0..n_assets).map(|i| 1e-4 * (i % 7) as f64 - 2e-4).collect();
    let shocks = sample_mvt(&drift, &cov, 5.0, n_days - 1, seed)?;
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    rng.set_stream(7);
    let u = Uniform::new(0.0, 1.0).expect("valid range");

    let mut out = String::from("date");
    for a in 0..n_assets {
        out.push_str(&format!(",A{:02}", a + 1));
    }
    out.push('\n');
    let mut price: Vec<f64> = (0..n_assets).map(|i| 20.0 + 5.0 * i as f64).collect();
    let mut date = NaiveDate::from_ymd_opt(2015, 1, 2).unwrap();
    for d in 0..n_days {
        if d > 0 {
            for (p, r) in price.iter_mut().zip(shocks.row(d - 1)) {
                *p *= r.exp();
            }
            date = date.succ_opt().unwrap();
            while chrono::Datelike::weekday(&date).number_from_monday() > 5 {
                date = date.succ_opt().unwrap();
            }
        }
        out.push_str(&date.format("%Y-%m-%d").to_string());
        for (a, p) in price.iter().enumerate() {
            let edge = (a == 0 && d < 3) || (a == 1 && d + 2 >= n_days);
            let interior = d > 0 && d + 1 < n_days;
            if edge || (interior && u.sample(&mut rng) < missing_frac) {
                out.push(',');
            } else {
                out.push_str(&format!(",{p:.4}"));
            }
        }
        out.push('\n');
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn panel(csv: &str) -> PricePanel {
        PricePanel::parse(csv.as_bytes()).unwrap()
    }

    #[test]
    fn midpoint_fill() {
        let p = panel("date,X\n2020-01-01,100\n2020-01-02,\n2020-01-03,120\n");
        assert_eq!(p.series(0), &[Some(100.0), Some(110.0), Some(120.0)]);
        assert_eq!(p.interpolated_count(), 1);
    }

    #[test]
    fn complete_data_passes_through() {
        let p = panel("date,X,Y\n2020-01-01,1,2\n2020-01-02,3,4\n");
        assert_eq!(p.series(1), &[Some(2.0), Some(4.0)]);
        assert_eq!(p.interpolated_count(), 0);
    }

    #[test]
    fn edges_are_dropped_not_extrapolated() {
        let p = panel("date,X,Y\n2020-01-01,,5\n2020-01-02,10,NA\n2020-01-03,11,7\n2020-01-04,12,\n");
        assert_eq!(p.window(0), (1, 3));
        assert_eq!(p.window(1), (0, 2));
        assert_eq!(p.series(1)[1], Some(6.0));
        assert_eq!(p.common_window(), Some((1, 2)));
        let r = prices_to_returns(&p, 1).unwrap();
        assert_eq!(r.len(), 1);
        assert!((r.row(0)[0] - 0.1).abs() < 1e-15);
        assert!((r.row(0)[1] - (7.0 / 6.0 - 1.0)).abs() < 1e-15);
    }

    #[test]
    fn parse_errors() {
        assert!(PricePanel::parse("date,X\n2020-01-02,1\n2020-01-01,2\n".as_bytes()).is_err());
        assert!(PricePanel::parse("date,X\n2020-01-01,1\n2020-01-02,\n".as_bytes()).is_err());
        assert!(PricePanel::parse("date,X\n2020-13-01,1\n2020-01-02,2\n".as_bytes()).is_err());
        assert!(PricePanel::parse("date,X\n2020-01-01,-1\n2020-01-02,2\n".as_bytes()).is_err());
        let p = panel("date,X\n2020-01-01,1\n2020-01-02,2\n");
        assert!(prices_to_returns(&p, 2).is_err());
        assert!(prices_to_returns(&p, 0).is_err());
    }

    #[test]
    fn one_period_return() {
        let p = panel("date,X,Y\n2020-01-01,100,5\n2020-01-02,110,5\n");
        let r = prices_to_returns(&p, 1).unwrap();
        assert!((r.row(0)[0] - 0.1).abs() < 1e-15);
        assert_eq!(r.row(0)[1], 0.0);
    }

    #[test]
    fn synthetic_panel_parses() {
        let csv = synthetic_price_csv(4, 120, 0.02, 1).unwrap();
        let p = panel(&csv);
        assert_eq!(p.assets().len(), 4);
        assert_eq!(p.dates().len(), 120);
        assert_eq!(p.window(0).0, 3);
        assert_eq!(p.window(1).1, 117);
        assert!(p.interpolated_count() > 0);
        assert_eq!(csv, synthetic_price_csv(4, 120, 0.02, 1).unwrap());
    }
}
