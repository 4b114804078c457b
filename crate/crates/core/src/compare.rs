//! Side-by-side metrics of two portfolios on one scenario distribution.

use serde::Serialize;

use crate::error::{Result, ValidationError};
use crate::model::{portfolio_loss, Portfolio, RiskLevel, ScenarioSet};
use crate::risk::var_sample;

/// Confidence levels of the VaR rows when none are given.
pub const DEFAULT_VAR_LEVELS: [f64; 5] = [0.99, 0.95, 0.90, 0.85, 0.80];

/// Metric values below this magnitude make a ratio undefined.
const NEAR_ZERO: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MetricRow {
    /// `mean`, `sd`, or `var_<level>`.
    pub metric: String,
    pub a: f64,
    pub b: f64,
    /// `a / b`; `None` when `b` is numerically zero.
    pub ratio: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ComparisonReport {
    pub rows: Vec<MetricRow>,
    /// `||w_a - w_b||_1`.
    pub distance: f64,
}

impl ComparisonReport {
    pub fn ratio(&self, metric: &str) -> Option<f64> {
        self.rows.iter().find(|r| r.metric == metric).and_then(|r| r.ratio)
    }
}

fn ratio(a: f64, b: f64) -> Option<f64> {
    if a.to_bits() == b.to_bits() {
        Some(1.0)
    } else if b.abs() < NEAR_ZERO {
        None
    } else {
        Some(a / b)
    }
}

/// Mean and standard deviation of the portfolio return, and the VaR of its
/// loss at each confidence level, for both portfolios.
pub fn compare_portfolios(
    wa: &Portfolio,
    wb: &Portfolio,
    scenarios: &ScenarioSet,
    var_levels: &[f64],
) -> Result<ComparisonReport> {
    if wa.n() != wb.n() {
        return Err(ValidationError::DimensionMismatch {
            expected: wa.n(),
            found: wb.n(),
        }
        .into());
    }
    let la = portfolio_loss(wa.weights(), scenarios)?;
    let lb = portfolio_loss(wb.weights(), scenarios)?;
    let moments = |l: &crate::model::LossSample| {
        let mean = -l.mean();
        let var: f64 = l
            .losses()
            .iter()
            .zip(l.probs())
            .map(|(x, p)| p * (-x - mean).powi(2))
            .sum();
        (mean, var.sqrt())
    };
    let (ma, sa) = moments(&la);
    let (mb, sb) = moments(&lb);
    let mut rows = vec![
        MetricRow {
            metric: "mean".into(),
            a: ma,
            b: mb,
            ratio: ratio(ma, mb),
        },
        MetricRow {
            metric: "sd".into(),
            a: sa,
            b: sb,
            ratio: ratio(sa, sb),
        },
    ];
    for &level in var_levels {
        let alpha = RiskLevel::new(1.0 - level)?;
        let (va, vb) = (var_sample(&la, alpha), var_sample(&lb, alpha));
        rows.push(MetricRow {
            metric: format!("var_{level}"),
            a: va,
            b: vb,
            ratio: ratio(va, vb),
        });
    }
    Ok(ComparisonReport {
        rows,
        distance: wa.l1_distance(wb),
    })
}
