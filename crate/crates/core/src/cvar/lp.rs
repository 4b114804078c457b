//! Linear programs with row senses and variable bounds, plus a plain text
//! exchange format.
//!
//! ```text
//! # comments and blank lines are ignored
//! sense max
//! vars 2
//! c 1 1
//! lo 0 0
//! hi inf inf
//! row <= 1 1 1
//! ```
//!
//! `c`, `lo` and `hi` carry one number per variable (`inf` and `-inf` are
//! accepted); every `row` line is a sense (`<=`, `>=` or `=`), the
//! coefficients, then the right-hand side. `vars` must precede the other lines.

use std::fmt::Write as _;

use nalgebra::DMatrix;
use serde::Serialize;

use crate::error::LpError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Sense {
    Min,
    Max,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum RowSense {
    Le,
    Ge,
    Eq,
}

impl RowSense {
    fn token(self) -> &'static str {
        match self {
            RowSense::Le => "<=",
            RowSense::Ge => ">=",
            RowSense::Eq => "=",
        }
    }
}

/// `opt c^T x  s.t.  A x (<=|>=|=) b,  lo <= x <= hi`.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearProgram {
    pub sense: Sense,
    pub c: Vec<f64>,
    pub a: DMatrix<f64>,
    pub row_senses: Vec<RowSense>,
    pub b: Vec<f64>,
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

impl LinearProgram {
    /// All variables in `[0, inf)` and no rows.
    pub fn new(sense: Sense, c: Vec<f64>) -> Self {
        let k = c.len();
        Self {
            sense,
            c,
            a: DMatrix::zeros(0, k),
            row_senses: Vec::new(),
            b: Vec::new(),
            lo: vec![0.0; k],
            hi: vec![f64::INFINITY; k],
        }
    }

    pub fn n_vars(&self) -> usize {
        self.c.len()
    }

    pub fn n_rows(&self) -> usize {
        self.b.len()
    }

    pub fn validate(&self) -> Result<(), LpError> {
        let k = self.n_vars();
        let m = self.n_rows();
        if self.a.shape() != (m, k) || self.row_senses.len() != m || self.lo.len() != k || self.hi.len() != k {
            return Err(LpError::Malformed(format!(
                "inconsistent dimensions: A is {:?}, {} senses, {} rhs, {} costs, {}/{} bounds",
                self.a.shape(),
                self.row_senses.len(),
                m,
                k,
                self.lo.len(),
                self.hi.len()
            )));
        }
        if self
            .c
            .iter()
            .chain(&self.b)
            .chain(self.a.iter())
            .any(|v| !v.is_finite())
        {
            return Err(LpError::Malformed("non-finite coefficient".into()));
        }
        for (j, (l, h)) in self.lo.iter().zip(&self.hi).enumerate() {
            if l.is_nan() || h.is_nan() || l > h || *l == f64::INFINITY || *h == f64::NEG_INFINITY {
                return Err(LpError::Malformed(format!("bad bounds [{l}, {h}] on variable {j}")));
            }
        }
        Ok(())
    }

    /// Serializes to the text format described in the module docs.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let join = |v: &[f64]| v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(" ");
        let sense = match self.sense {
            Sense::Min => "min",
            Sense::Max => "max",
        };
        writeln!(out, "sense {sense}").unwrap();
        writeln!(out, "vars {}", self.n_vars()).unwrap();
        writeln!(out, "c {}", join(&self.c)).unwrap();
        writeln!(out, "lo {}", join(&self.lo)).unwrap();
        writeln!(out, "hi {}", join(&self.hi)).unwrap();
        for i in 0..self.n_rows() {
            let row: Vec<f64> = self.a.row(i).iter().copied().collect();
            writeln!(out, "row {} {} {}", self.row_senses[i].token(), join(&row), self.b[i]).unwrap();
        }
        out
    }

    /// Parses the text format described in the module docs.
    pub fn from_text(text: &str) -> Result<Self, LpError> {
        let mut sense = None;
        let mut k: Option<usize> = None;
        let (mut c, mut lo, mut hi) = (None, None, None);
        let mut rows: Vec<(RowSense, Vec<f64>, f64)> = Vec::new();
        for (idx, raw) in text.lines().enumerate() {
            let line = idx + 1;
            let err = |msg: String| LpError::Parse { line, msg };
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let mut tokens = content.split_whitespace();
            let key = tokens.next().unwrap_or_default();
            let numbers = |tokens: std::str::SplitWhitespace<'_>| -> Result<Vec<f64>, LpError> {
                tokens
                    .map(|t| t.parse::<f64>().map_err(|e| err(format!("bad number {t:?}: {e}"))))
                    .collect()
            };
            let need_k = || k.ok_or_else(|| err("`vars` must come first".into()));
            match key {
                "sense" => {
                    sense = Some(match tokens.next() {
                        Some("min") => Sense::Min,
                        Some("max") => Sense::Max,
                        other => return Err(err(format!("unknown sense {other:?}"))),
                    })
                }
                "vars" => {
                    let v = tokens.next().ok_or_else(|| err("missing count".into()))?;
                    k = Some(v.parse().map_err(|e| err(format!("bad count {v:?}: {e}")))?);
                }
                "c" | "lo" | "hi" => {
                    let kk = need_k()?;
                    let v = numbers(tokens)?;
                    if v.len() != kk {
                        return Err(err(format!("expected {kk} values, found {}", v.len())));
                    }
                    match key {
                        "c" => c = Some(v),
                        "lo" => lo = Some(v),
                        _ => hi = Some(v),
                    }
                }
                "row" => {
                    let kk = need_k()?;
                    let rs = match tokens.next() {
                        Some("<=") => RowSense::Le,
                        Some(">=") => RowSense::Ge,
                        Some("=") => RowSense::Eq,
                        other => return Err(err(format!("unknown row sense {other:?}"))),
                    };
                    let mut v = numbers(tokens)?;
                    if v.len() != kk + 1 {
                        return Err(err(format!("expected {} values, found {}", kk + 1, v.len())));
                    }
                    let rhs = v.pop().unwrap();
                    rows.push((rs, v, rhs));
                }
                other => return Err(err(format!("unknown keyword {other:?}"))),
            }
        }
        let missing = |what: &str| LpError::Parse {
            line: 0,
            msg: format!("missing `{what}` line"),
        };
        let k = k.ok_or_else(|| missing("vars"))?;
        let mut lp = LinearProgram::new(sense.ok_or_else(|| missing("sense"))?, c.ok_or_else(|| missing("c"))?);
        if let Some(lo) = lo {
            lp.lo = lo;
        }
        if let Some(hi) = hi {
            lp.hi = hi;
        }
        lp.a = DMatrix::from_fn(rows.len(), k, |i, j| rows[i].1[j]);
        lp.row_senses = rows.iter().map(|r| r.0).collect();
        lp.b = rows.iter().map(|r| r.2).collect();
        lp.validate()?;
        Ok(lp)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
}

/// Result of a simplex solve. `x`, `objective` and `duals` are meaningful
/// when the status is optimal.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LpSolution {
    pub status: LpStatus,
    pub x: Vec<f64>,
    pub objective: f64,
    /// Row multipliers `y` in the program's own sense: the optimal value
    /// changes by `y_i` per unit increase of `b_i`.
    pub duals: Vec<f64>,
    /// Basic column per row. Index `n_vars + i` is the slack of row `i`;
    /// higher indices are artificials left on redundant rows.
    pub basis: Vec<usize>,
    pub pivots: usize,
}
