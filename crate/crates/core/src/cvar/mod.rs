//! Minimum-CVaR portfolios by linear programming.
//!
//! The primal LP over `(w, z, t)` has one coupling row per scenario; its dual
//! over `(xi, u)` has one structural row per instrument plus `sum(u) = 1`,
//! with the scenarios appearing only as bounded columns:
//!
//! ```text
//! min  t + sum_j (p_j / alpha) z_j           max  xi
//! s.t. z_j + (a^j)^T w + t >= 0              s.t. xi + sum_j a_i^j u_j <= 0   (i = 1..n)
//!      1^T w = 1,  w >= 0,  z >= 0                sum_j u_j = 1,  0 <= u_j <= p_j / alpha
//! ```
//!
//! The row multipliers of the dual's `n` structural rows are the optimal
//! weights, and the multiplier of `sum(u) = 1` is the optimal `t`. A minimum
//! expected return `r^T w >= r_min` adds a row to the primal and a column
//! `eta >= 0` (objective `r_min`, coefficients `r_i`) to the dual.

mod lp;
mod simplex;

use std::time::Instant;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

pub use lp::{LinearProgram, LpSolution, LpStatus, RowSense, Sense};
pub use simplex::{default_max_pivots, simplex_solve};

use crate::error::{LpError, Result};
use crate::evar::{Method, PortfolioSolution};
use crate::model::{dot, Portfolio, RiskLevel, ScenarioSet};

/// `min t + alpha^-1 sum_j p_j z_j  s.t.  z_j + (a^j)^T w + t >= 0,  1^T w = 1`.
/// Variables are ordered `(w_1..w_n, z_1..z_N, t)`.
pub fn build_primal_lp(s: &ScenarioSet, alpha: RiskLevel) -> LinearProgram {
    build_primal_lp_with(s, alpha, None)
}

/// [`build_primal_lp`] with an optional last row `r^T w >= r_min`, `r` the
/// expected instrument returns.
pub fn build_primal_lp_with(s: &ScenarioSet, alpha: RiskLevel, min_return: Option<f64>) -> LinearProgram {
    let (n, big_n) = (s.n(), s.len());
    let k = n + big_n + 1;
    let mut c = vec![0.0; k];
    for (cj, p) in c[n..n + big_n].iter_mut().zip(s.probs()) {
        *cj = p / alpha.value();
    }
    c[k - 1] = 1.0;
    let mut lp = LinearProgram::new(Sense::Min, c);
    lp.lo[k - 1] = f64::NEG_INFINITY;
    let mut a = DMatrix::zeros(big_n + 1, k);
    for (j, row) in s.rows().enumerate() {
        for (i, v) in row.iter().enumerate() {
            a[(j, i)] = *v;
        }
        a[(j, n + j)] = 1.0;
        a[(j, k - 1)] = 1.0;
    }
    for i in 0..n {
        a[(big_n, i)] = 1.0;
    }
    lp.a = a;
    lp.row_senses = vec![RowSense::Ge; big_n];
    lp.row_senses.push(RowSense::Eq);
    lp.b = vec![0.0; big_n];
    lp.b.push(1.0);
    if let Some(r_min) = min_return {
        let mut row = vec![0.0; k];
        row[..n].copy_from_slice(&s.mean_returns());
        lp.a = lp.a.insert_row(big_n + 1, 0.0);
        lp.a.row_mut(big_n + 1).copy_from_slice(&row);
        lp.row_senses.push(RowSense::Ge);
        lp.b.push(r_min);
    }
    lp
}

/// `max xi  s.t.  xi + sum_j a_i^j u_j <= 0,  sum_j u_j = 1,  0 <= u_j <= p_j / alpha`.
/// Variables are ordered `(xi, u_1..u_N)`.
pub fn build_dual_lp(s: &ScenarioSet, alpha: RiskLevel) -> LinearProgram {
    build_dual_lp_with(s, alpha, None)
}

/// [`build_dual_lp`] with the extra last column `eta >= 0` of a minimum-return
/// row.
pub fn build_dual_lp_with(s: &ScenarioSet, alpha: RiskLevel, min_return: Option<f64>) -> LinearProgram {
    let (n, big_n) = (s.n(), s.len());
    let mut c = vec![0.0; big_n + 1];
    c[0] = 1.0;
    let mut lp = LinearProgram::new(Sense::Max, c);
    lp.lo[0] = f64::NEG_INFINITY;
    for (h, p) in lp.hi[1..].iter_mut().zip(s.probs()) {
        *h = p / alpha.value();
    }
    let mut a = DMatrix::zeros(n + 1, big_n + 1);
    for i in 0..n {
        a[(i, 0)] = 1.0;
    }
    for (j, row) in s.rows().enumerate() {
        for (i, v) in row.iter().enumerate() {
            a[(i, j + 1)] = *v;
        }
        a[(n, j + 1)] = 1.0;
    }
    lp.a = a;
    lp.row_senses = vec![RowSense::Le; n];
    lp.row_senses.push(RowSense::Eq);
    lp.b = vec![0.0; n];
    lp.b.push(1.0);
    if let Some(r_min) = min_return {
        let k = big_n + 1;
        lp.a = lp.a.insert_column(k, 0.0);
        for (i, r) in s.mean_returns().iter().enumerate() {
            lp.a[(i, k)] = *r;
        }
        lp.c.push(r_min);
        lp.lo.push(0.0);
        lp.hi.push(f64::INFINITY);
    }
    lp
}

/// `t + alpha^-1 sum_j p_j max(-(a^j)^T w - t, 0)`, whose minimum over `t` is
/// the CVaR of the portfolio loss.
pub fn cvar_nondiff_objective(w: &[f64], t: f64, s: &ScenarioSet, alpha: RiskLevel) -> f64 {
    let hinge: f64 = s
        .rows()
        .zip(s.probs())
        .map(|(a, p)| p * (-dot(a, w) - t).max(0.0))
        .sum();
    t + hinge / alpha.value()
}

/// Which LP the simplex solves.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CvarMethod {
    PrimalLp,
    DualLp,
}

/// Minimum-CVaR portfolio through the primal or dual LP.
pub fn solve_cvar_portfolio(s: &ScenarioSet, alpha: RiskLevel, method: CvarMethod) -> Result<PortfolioSolution> {
    solve_cvar_portfolio_with(s, alpha, method, None)
}

/// [`solve_cvar_portfolio`] with an optional minimum expected return.
pub fn solve_cvar_portfolio_with(
    s: &ScenarioSet,
    alpha: RiskLevel,
    method: CvarMethod,
    min_return: Option<f64>,
) -> Result<PortfolioSolution> {
    let clock = Instant::now();
    let n = s.n();
    let (lp, tag) = match method {
        CvarMethod::PrimalLp => (build_primal_lp_with(s, alpha, min_return), Method::CvarPrimalLp),
        CvarMethod::DualLp => (build_dual_lp_with(s, alpha, min_return), Method::CvarDualLp),
    };
    let sol = simplex_solve(&lp, default_max_pivots(&lp))?;
    // An infeasible return floor shows up as an unbounded dual.
    match (sol.status, method) {
        (LpStatus::Optimal, _) => {}
        (LpStatus::Infeasible, CvarMethod::PrimalLp) | (LpStatus::Unbounded, CvarMethod::DualLp) => {
            return Err(LpError::NotOptimal("infeasible").into())
        }
        (LpStatus::Unbounded, CvarMethod::PrimalLp) => return Err(LpError::NotOptimal("unbounded").into()),
        (LpStatus::Infeasible, CvarMethod::DualLp) => return Err(LpError::NotOptimal("dual infeasible").into()),
    }
    let (w, t_star) = match method {
        CvarMethod::PrimalLp => (sol.x[..n].to_vec(), sol.x[n + s.len()]),
        CvarMethod::DualLp => (sol.duals[..n].to_vec(), sol.duals[n]),
    };
    Ok(PortfolioSolution {
        method: tag,
        weights: Portfolio::renormalized(w)?,
        t_star,
        objective: sol.objective,
        alpha,
        iterations: sol.pivots,
        r_dual: None,
        r_pri: None,
        eta_hat: None,
        wall_ms: clock.elapsed().as_secs_f64() * 1e3,
    })
}
