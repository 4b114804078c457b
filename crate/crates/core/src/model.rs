//! Scenario and portfolio data model.
//!
//! A [`ScenarioSet`] is the discrete distribution of the return vector: `N`
//! scenarios (rows) over `n` instruments (columns), each with a probability.
//! A [`Portfolio`] is a point of the unit simplex, and [`portfolio_loss`] maps
//! it to the per-scenario losses `-(a^j)^T w`.

use std::io::{Read, Write};
use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result, ValidationError};

/// Tolerance on `sum(w) = 1` accepted by [`validate_portfolio`].
pub const WEIGHT_SUM_TOL: f64 = 1e-9;

/// Relative deviation of a probability column from 1 tolerated by the CSV
/// reader before it refuses the file.
pub const CSV_PROB_SUM_TOL: f64 = 1e-6;

/// Risk level `alpha` in `(0, 1]`; the confidence level is `1 - alpha`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct RiskLevel(f64);

impl RiskLevel {
    pub fn new(alpha: f64) -> Result<Self, ValidationError> {
        if alpha > 0.0 && alpha <= 1.0 {
            Ok(Self(alpha))
        } else {
            Err(ValidationError::RiskLevel(alpha))
        }
    }

    pub fn value(self) -> f64 {
        self.0
    }

    pub fn confidence(self) -> f64 {
        1.0 - self.0
    }
}

impl Default for RiskLevel {
    /// 95% confidence.
    fn default() -> Self {
        Self(0.05)
    }
}

impl TryFrom<f64> for RiskLevel {
    type Error = ValidationError;
    fn try_from(v: f64) -> Result<Self, ValidationError> {
        Self::new(v)
    }
}

impl From<RiskLevel> for f64 {
    fn from(a: RiskLevel) -> f64 {
        a.0
    }
}

/// Return-rate scenarios with probabilities, stored one scenario per row.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioSet {
    returns: Vec<f64>,
    probs: Arc<[f64]>,
    n: usize,
}

impl ScenarioSet {
    /// Number of instruments.
    pub fn n(&self) -> usize {
        self.n
    }

    /// Number of scenarios.
    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    /// Row-major `N x n` return matrix.
    pub fn returns(&self) -> &[f64] {
        &self.returns
    }

    /// Returns of scenario `j`.
    pub fn row(&self, j: usize) -> &[f64] {
        &self.returns[j * self.n..(j + 1) * self.n]
    }

    pub fn rows(&self) -> impl ExactSizeIterator<Item = &[f64]> + '_ {
        self.returns.chunks_exact(self.n)
    }

    /// Column `i` as an owned vector.
    pub fn column(&self, i: usize) -> Vec<f64> {
        self.rows().map(|r| r[i]).collect()
    }

    /// Probability-weighted column means, i.e. the expected return of each
    /// instrument.
    pub fn mean_returns(&self) -> Vec<f64> {
        let mut mean = vec![0.0; self.n];
        for (row, &p) in self.rows().zip(self.probs.iter()) {
            for (m, &a) in mean.iter_mut().zip(row) {
                *m += p * a;
            }
        }
        mean
    }

    /// Keeps only the listed instrument columns, in the given order.
    pub fn select_columns(&self, cols: &[usize]) -> Result<ScenarioSet, ValidationError> {
        if cols.is_empty() {
            return Err(ValidationError::EmptyMatrix);
        }
        if let Some(&bad) = cols.iter().find(|&&c| c >= self.n) {
            return Err(ValidationError::DimensionMismatch {
                expected: self.n,
                found: bad + 1,
            });
        }
        let mut returns = Vec::with_capacity(cols.len() * self.len());
        for row in self.rows() {
            returns.extend(cols.iter().map(|&c| row[c]));
        }
        Ok(ScenarioSet {
            returns,
            probs: Arc::clone(&self.probs),
            n: cols.len(),
        })
    }

    /// Builds a set from a row-major buffer. Same rules as [`build_scenario_set`].
    pub fn from_row_major(returns: Vec<f64>, n: usize, probs: Option<Vec<f64>>) -> Result<Self, ValidationError> {
        if n == 0 || returns.is_empty() {
            return Err(ValidationError::EmptyMatrix);
        }
        if !returns.len().is_multiple_of(n) {
            return Err(ValidationError::Ragged {
                row: returns.len() / n,
                found: returns.len() % n,
                expected: n,
            });
        }
        let big_n = returns.len() / n;
        if let Some(pos) = returns.iter().position(|v| !v.is_finite()) {
            return Err(ValidationError::NonFinite {
                row: pos / n,
                col: pos % n,
            });
        }
        let probs = match probs {
            None => vec![1.0 / big_n as f64; big_n],
            Some(p) => {
                if p.len() != big_n {
                    return Err(ValidationError::DimensionMismatch {
                        expected: big_n,
                        found: p.len(),
                    });
                }
                normalize_probs(p)?
            }
        };
        Ok(Self {
            returns,
            probs: probs.into(),
            n,
        })
    }

    /// Reads the scenario CSV format: optional header `p,r1,...,rn`, then one
    /// row per scenario. Without a leading `p` header column every column is a
    /// return and weights are uniform.
    pub fn read_csv<R: Read>(reader: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(false)
            .trim(csv::Trim::All)
            .from_reader(reader);
        let mut records = rdr.records();
        let mut has_p = false;
        let mut rows: Vec<Vec<f64>> = Vec::new();
        if let Some(first) = records.next() {
            let first = first?;
            match parse_row(&first) {
                Some(vals) => rows.push(vals),
                None => has_p = first.get(0).is_some_and(|h| h.eq_ignore_ascii_case("p")),
            }
        }
        for (i, rec) in records.enumerate() {
            let rec = rec?;
            let vals = parse_row(&rec).ok_or_else(|| Error::Input {
                path: "<scenario csv>".into(),
                msg: format!("unparseable number on data row {}", i + 1),
            })?;
            rows.push(vals);
        }
        let Some(width) = rows.first().map(Vec::len) else {
            return Err(ValidationError::EmptyMatrix.into());
        };
        let mut probs = has_p.then(|| Vec::with_capacity(rows.len()));
        let n = if has_p { width - 1 } else { width };
        let mut returns = Vec::with_capacity(rows.len() * n);
        for (j, row) in rows.into_iter().enumerate() {
            if row.len() != width {
                return Err(ValidationError::Ragged {
                    row: j,
                    found: row.len(),
                    expected: width,
                }
                .into());
            }
            match probs.as_mut() {
                Some(p) => {
                    p.push(row[0]);
                    returns.extend_from_slice(&row[1..]);
                }
                None => returns.extend_from_slice(&row),
            }
        }
        if let Some(p) = &probs {
            if let Some((index, &value)) = p.iter().enumerate().find(|(_, v)| !(**v > 0.0)) {
                return Err(ValidationError::NonPositiveProbability { index, value }.into());
            }
            let sum: f64 = p.iter().sum();
            if (sum - 1.0).abs() > CSV_PROB_SUM_TOL {
                return Err(ValidationError::BadProbabilitySum { sum }.into());
            }
        }
        Ok(Self::from_row_major(returns, n, probs)?)
    }

    pub fn load_csv(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let file = std::fs::File::open(path)?;
        Self::read_csv(std::io::BufReader::new(file)).map_err(|e| match e {
            Error::Io(_) => e,
            other => Error::Input {
                path: path.to_path_buf(),
                msg: other.to_string(),
            },
        })
    }

    /// Writes the `p,r1,...,rn` form with round-trip float formatting.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        let mut header = vec!["p".to_string()];
        header.extend((1..=self.n).map(|i| format!("r{i}")));
        w.write_record(&header)?;
        let mut buf = Vec::with_capacity(self.n + 1);
        for (row, p) in self.rows().zip(self.probs.iter()) {
            buf.clear();
            buf.push(p.to_string());
            buf.extend(row.iter().map(f64::to_string));
            w.write_record(&buf)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn save_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let file = std::fs::File::create(path)?;
        self.write_csv(std::io::BufWriter::new(file))
    }
}

fn parse_row(rec: &csv::StringRecord) -> Option<Vec<f64>> {
    rec.iter().map(|s| s.parse::<f64>().ok()).collect()
}

fn normalize_probs(mut p: Vec<f64>) -> Result<Vec<f64>, ValidationError> {
    if let Some((index, &value)) = p.iter().enumerate().find(|(_, v)| !(**v > 0.0) || !v.is_finite()) {
        return Err(ValidationError::NonPositiveProbability { index, value });
    }
    let sum: f64 = p.iter().sum();
    if !sum.is_finite() {
        return Err(ValidationError::BadProbabilitySum { sum });
    }
    // Leave already-normalized input untouched so the constructor is idempotent.
    if (sum - 1.0).abs() > 1e-15 * p.len() as f64 {
        for v in &mut p {
            *v /= sum;
        }
    }
    Ok(p)
}

/// Builds a scenario set from per-scenario rows. Omitted probabilities default
/// to `1/N`; supplied ones are renormalized to sum to one.
pub fn build_scenario_set(returns: &[Vec<f64>], probs: Option<&[f64]>) -> Result<ScenarioSet, ValidationError> {
    let n = returns.first().map(Vec::len).unwrap_or(0);
    if n == 0 {
        return Err(ValidationError::EmptyMatrix);
    }
    let mut flat = Vec::with_capacity(n * returns.len());
    for (row, r) in returns.iter().enumerate() {
        if r.len() != n {
            return Err(ValidationError::Ragged {
                row,
                found: r.len(),
                expected: n,
            });
        }
        flat.extend_from_slice(r);
    }
    ScenarioSet::from_row_major(flat, n, probs.map(<[f64]>::to_vec))
}

/// Long-only, fully invested weight vector.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(transparent)]
pub struct Portfolio(Vec<f64>);

impl Portfolio {
    pub fn weights(&self) -> &[f64] {
        &self.0
    }

    pub fn n(&self) -> usize {
        self.0.len()
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }

    /// Equal weights `1/n`.
    pub fn uniform(n: usize) -> Self {
        Self(vec![1.0 / n as f64; n])
    }

    /// Clips negative round-off to zero and rescales onto the simplex, then
    /// validates.
    pub fn renormalized(mut weights: Vec<f64>) -> Result<Self, ValidationError> {
        for w in &mut weights {
            if *w <= 0.0 {
                *w = 0.0;
            }
        }
        let sum: f64 = weights.iter().sum();
        if !(sum > 0.0) || !sum.is_finite() {
            return Err(ValidationError::WeightSum { sum });
        }
        for w in &mut weights {
            *w /= sum;
        }
        validate_portfolio(&weights)
    }

    /// L1 distance between two weight vectors.
    pub fn l1_distance(&self, other: &Portfolio) -> f64 {
        self.0.iter().zip(&other.0).map(|(a, b)| (a - b).abs()).sum()
    }
}

/// Accepts `weights` iff they are nonnegative and sum to one within
/// [`WEIGHT_SUM_TOL`].
pub fn validate_portfolio(weights: &[f64]) -> Result<Portfolio, ValidationError> {
    if weights.is_empty() {
        return Err(ValidationError::EmptyMatrix);
    }
    for (index, &value) in weights.iter().enumerate() {
        if !value.is_finite() {
            return Err(ValidationError::NonFinite { row: 0, col: index });
        }
        if value < 0.0 {
            return Err(ValidationError::NegativeWeight { index, value });
        }
    }
    let sum: f64 = weights.iter().sum();
    if (sum - 1.0).abs() > WEIGHT_SUM_TOL {
        return Err(ValidationError::WeightSum { sum });
    }
    Ok(Portfolio(weights.to_vec()))
}

impl<'de> Deserialize<'de> for Portfolio {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let w = Vec::<f64>::deserialize(d)?;
        validate_portfolio(&w).map_err(serde::de::Error::custom)
    }
}

/// Realized losses of one position across the scenarios, sharing the
/// scenario probabilities.
#[derive(Debug, Clone, PartialEq)]
pub struct LossSample {
    losses: Vec<f64>,
    probs: Arc<[f64]>,
}

impl LossSample {
    pub fn new(losses: Vec<f64>, probs: Vec<f64>) -> Result<Self, ValidationError> {
        if losses.is_empty() {
            return Err(ValidationError::EmptyMatrix);
        }
        if losses.len() != probs.len() {
            return Err(ValidationError::DimensionMismatch {
                expected: losses.len(),
                found: probs.len(),
            });
        }
        if let Some(pos) = losses.iter().position(|v| !v.is_finite()) {
            return Err(ValidationError::NonFinite { row: pos, col: 0 });
        }
        let probs = normalize_probs(probs)?;
        Ok(Self {
            losses,
            probs: probs.into(),
        })
    }

    /// Equally likely losses.
    pub fn uniform(losses: Vec<f64>) -> Result<Self, ValidationError> {
        let n = losses.len();
        Self::new(losses, vec![1.0 / n.max(1) as f64; n])
    }

    /// Same probabilities, different losses.
    pub fn with_losses(&self, losses: Vec<f64>) -> Result<Self, ValidationError> {
        if losses.len() != self.losses.len() {
            return Err(ValidationError::DimensionMismatch {
                expected: self.losses.len(),
                found: losses.len(),
            });
        }
        if let Some(pos) = losses.iter().position(|v| !v.is_finite()) {
            return Err(ValidationError::NonFinite { row: pos, col: 0 });
        }
        Ok(Self {
            losses,
            probs: Arc::clone(&self.probs),
        })
    }

    pub fn losses(&self) -> &[f64] {
        &self.losses
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn len(&self) -> usize {
        self.losses.len()
    }

    pub fn is_empty(&self) -> bool {
        self.losses.is_empty()
    }

    pub fn mean(&self) -> f64 {
        self.losses.iter().zip(self.probs.iter()).map(|(x, p)| x * p).sum()
    }

    pub fn max(&self) -> f64 {
        self.losses.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn min(&self) -> f64 {
        self.losses.iter().copied().fold(f64::INFINITY, f64::min)
    }
}

/// Losses `G(w, a^j) = -(a^j)^T w` for every scenario.
pub fn portfolio_loss(w: &[f64], s: &ScenarioSet) -> Result<LossSample, ValidationError> {
    if w.len() != s.n() {
        return Err(ValidationError::DimensionMismatch {
            expected: s.n(),
            found: w.len(),
        });
    }
    let losses = s.rows().map(|a| -dot(a, w)).collect();
    Ok(LossSample {
        losses,
        probs: Arc::clone(&s.probs),
    })
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}
